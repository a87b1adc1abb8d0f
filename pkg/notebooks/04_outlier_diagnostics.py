# %% [markdown]
# # Flagging outliers with Anscombe residuals
#
# A robust Poisson fit leaves contaminated counts with large residuals, so
# they can be flagged with a fixed cutoff.

# %%
import numpy as np

from dpdspline import Poisson, anscombe_residuals, assemble, bench, build_knots, select_lambda

s = bench.Scenario("poisson", "g2", n=200, eps=0.1, seed=4)
t, y, mu = bench.generate(s)
basis = assemble(build_knots(t, strategy="auto"), t, 2)

for alpha in (0.0, 1.0):
    lam, _, fits = select_lambda(y, basis, Poisson(), alpha, return_fits=True)
    mu_hat = Poisson().mean(fits[lam].theta_hat)
    rep = anscombe_residuals(Poisson(), y, mu_hat)
    print(f"alpha={alpha}: lambda={lam:.3g}, flagged {rep.flags.sum()} of {y.size}, "
          f"MSE={np.mean((mu_hat - mu) ** 2):.3f}")
