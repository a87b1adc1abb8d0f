# %% [markdown]
# # Spline basis and roughness penalty
#
# A cubic B-spline basis on [0, 1] with a second-derivative penalty.
# Linear functions sit in the penalty's null space, so a huge smoothing
# parameter shrinks any fit towards a straight line.

# %%
import numpy as np

from dpdspline import Gaussian, assemble, build_knots, fit

t = np.arange(1, 201) / 201
kv = build_knots(t, p=4, m=2, strategy="thinned")
basis = assemble(kv, t, m=2)
print(f"{kv.interior.size} interior knots, {basis.dim} basis functions")
print("eigenvalues of P (smallest four):", np.round(np.linalg.eigvalsh(basis.P)[:4], 6))

# %% [markdown]
# The basis is a partition of unity, and rows of the design matrix hold at
# most four nonzeros.

# %%
print("row sums in [%.15f, %.15f]" % (basis.B.sum(1).min(), basis.B.sum(1).max()))
print("max nonzeros per row:", int((basis.B != 0).sum(1).max()))

# %% [markdown]
# Effective degrees of freedom fall from the basis dimension towards 2 as the
# penalty grows.

# %%
rng = np.random.default_rng(0)
y = np.sin(6 * t) + 0.3 * rng.standard_normal(t.size)
for lam in (1e-6, 1e-2, 1.0, 1e2, 1e6, 1e12):
    res = fit(y, basis, Gaussian(0.09), 0.0, lam)
    print(f"lambda={lam:8.0e}  edf={res.edf:7.3f}  b'Pb={basis.penalty(res.coefs):.2e}")
