"""What the evaluation metrics reward, on hand-sized examples.

Run:  python3 demos/03_metrics_tour.py
"""

from storyanchor.metrics import EvalInstance, bleu, cider, meteor_lite, rouge_l


def inst(hyp, *refs):
    return EvalInstance(hyp.split(), [r.split() for r in refs])


print("BLEU: clipped n-gram precision with a brevity penalty")
print("  identical          :", round(bleu([inst("the cat sat", "the cat sat")], 1), 4))
print('  "the the the"      :', round(bleu([inst("the the the", "the cat sat")], 1), 4),
      " <- each extra 'the' is clipped to the reference count")
print("  short hypothesis   :", round(bleu([inst("a b", "a b c d")], 1), 4),
      " <- perfect precision, but brevity-penalized")

print("\nROUGE-L: F-measure over the longest common subsequence")
print("  word dropped       :", round(rouge_l([inst("a b c d", "a x b c")]), 4))
print("  order broken       :", round(rouge_l([inst("a b c", "c b a")]), 4))

print("\nMETEOR-lite: unigram alignment (exact, then stemmed) with a "
      "fragmentation penalty")
print("  identical          :", round(meteor_lite([inst("a b c", "a b c")]), 4))
print("  stem match         :", round(meteor_lite([inst("running", "run")]), 4))
print("  scrambled order    :", round(meteor_lite([inst("a b", "b a")]), 4),
      " <- same words, two chunks")

print("\nCIDEr: tf-idf weighted n-gram consensus, corpus level, scaled to [0,10]")
corpus = [inst("the cat sat", "the cat sat", "a cat sat"),
          inst("dogs run fast", "dogs run fast", "the dogs run"),
          inst("a bird sings", "a bird sings", "birds sing loudly")]
print("  3-album toy corpus :", round(cider(corpus), 4))
rare = [inst("zebra", "the zebra ran")] + corpus
common = [inst("the", "the zebra ran")] + corpus
print("  rare word match    :", round(cider(rare), 4),
      " vs common word match:", round(cider(common), 4),
      " <- idf discounts frequent words")
