export * from "./safv";
export * from "./synth";
export * from "./extract";
