"""Multi-sample predictive distributions: dropout stacks and Gaussian logits.

Ensemble-style models hand the evaluator a stack of softmax samples per
point; aleatoric models hand it logit means and scales. Both collapse to a
single predictive distribution before any confidence is computed.
"""
import numpy as np

from sparseval import (
    LogitTensor,
    ProbabilityStack,
    aggregate_samples,
    entropy_confidence,
    max_softmax_confidence,
    sample_probabilistic_logits,
    softmax,
)

rng = np.random.default_rng(3)
n, k = 6, 4

# Stochastic forward passes (dropout style): 30 samples per point. The
# predictive distribution is their pointwise mean.
base = rng.normal(size=(n, k)) * 2.0
stack = np.stack(
    [softmax(LogitTensor(base + rng.normal(size=(n, k)))).data[0] for _ in range(30)]
)
dropout_stack = ProbabilityStack(stack)
predictive = aggregate_samples(dropout_stack)
print("30-sample stack ->", predictive.samples, "sample, rows sum to",
      predictive.data.sum(axis=2).round(6)[0][:3], "...")

conf_sm, preds = max_softmax_confidence(predictive)
conf_ent = entropy_confidence(predictive)
print("\npoint  pred  max-softmax  entropy-confidence")
for i in range(n):
    print(f"{i:5d} {preds.values[i]:5d} {conf_sm.scores[i]:12.4f} {conf_ent.scores[i]:19.4f}")

# Gaussian logits: a mean and a per-logit scale. Sampling is deterministic
# for a given seed, and the noise at (sample, point, class) never depends on
# array extents, so chunked generation reproduces the same values.
mean = rng.normal(size=(n, k))
scale = 0.1 + rng.random((n, k))
noisy = LogitTensor(mean, scale)

five = aggregate_samples(sample_probabilistic_logits(noisy, samples=5, seed=11))
many = aggregate_samples(sample_probabilistic_logits(noisy, samples=2000, seed=11))
crisp = softmax(LogitTensor(mean))

print("\nmax prob of point 0, deterministic:", float(crisp.data[0, 0].max()))
print("max prob of point 0, 5 samples:    ", float(five.data[0, 0].max()))
print("max prob of point 0, 2000 samples: ", float(many.data[0, 0].max()))
# Averaging over logit noise flattens the predictive distribution, which is
# the whole point: uncertain logits should not produce certain predictions.
