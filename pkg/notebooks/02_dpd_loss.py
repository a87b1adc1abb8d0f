# %% [markdown]
# # The density power divergence loss
#
# For alpha = 0 the loss is the negative log-likelihood. For alpha > 0 the
# influence of a single observation on the estimating equation is bounded.

# %%
import numpy as np

from dpdspline import Gaussian, Poisson, loss

ys = np.array([0.0, 1.0, 3.0, 10.0, 100.0])
for alpha in (0.0, 0.25, 1.0):
    g = loss(Gaussian(), alpha, ys, 0.0).grad
    print(f"Gaussian alpha={alpha:4.2f}  dl/dtheta at y={ys.tolist()}: {np.round(g, 4).tolist()}")

# %% [markdown]
# Poisson: the likelihood score grows linearly in y, while the DPD score
# settles at a constant for large counts.

# %%
counts = np.array([0.0, 4.0, 20.0, 200.0, 2000.0])
for alpha in (0.0, 0.5, 1.0):
    g = loss(Poisson(), alpha, counts, np.log(4.0)).grad
    print(f"Poisson alpha={alpha:3.1f}  {np.round(g, 4).tolist()}")

# %% [markdown]
# Fisher consistency: at the true parameter the expected score is zero for
# every alpha.

# %%
ys = np.arange(0.0, 200.0)
th = np.log(4.0)
f = Poisson().density(ys, th)
for alpha in (0.1, 0.5, 1.0):
    print(f"alpha={alpha}: E[l'] = {np.sum(f * loss(Poisson(), alpha, ys, th).grad):.2e}")
