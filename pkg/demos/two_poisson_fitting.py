"""
Fitting term eliteness with EM and Gibbs sampling
==================================================

Term counts are modelled as a mixture of two Poissons: a high-rate
component for documents where the term is "elite" (the document is about
it) and a low-rate one for incidental mentions.  We simulate counts for one
term, fit the mixture both ways, and look at the eliteness posterior.
"""

import time

from tim.mixture import (
    CountHistogram,
    GibbsConfig,
    TwoPoissonParams,
    eliteness_posterior,
    em_fit,
    gibbs_fit,
    init_params,
)
from tim.synthetic import sample_two_poisson

truth = TwoPoissonParams(mu_elite=5.0, mu_nonelite=0.3, p_elite=0.2)
counts = sample_two_poisson(10_000, truth.mu_elite, truth.mu_nonelite, truth.p_elite, seed=1234)

# Estimation runs on the histogram, so cost depends on distinct counts, not documents.
hist = CountHistogram.from_samples(counts)
print("histogram:", {k: int(v) for k, v in hist.as_dict().items()})

init = init_params(hist)
print(f"start   mu1={init.mu_elite:.3f} mu0={init.mu_nonelite:.3f} p={init.p_elite:.3f}")

t0 = time.perf_counter()
em, trace = em_fit(hist, init)
print(f"EM      mu1={em.mu_elite:.3f} mu0={em.mu_nonelite:.3f} p={em.p_elite:.3f} "
      f"({len(trace) - 1} iterations, {time.perf_counter() - t0:.3f}s)")

t0 = time.perf_counter()
gb = gibbs_fit(hist, GibbsConfig(seed=7).centered_on(init), init)
print(f"Gibbs   mu1={gb.mu_elite:.3f} mu0={gb.mu_nonelite:.3f} p={gb.p_elite:.3f} "
      f"({time.perf_counter() - t0:.3f}s)")

print("\ntf  P(elite | tf)")
for tf in range(8):
    print(f"{tf:>2}  {eliteness_posterior(em, tf):.4f}")
