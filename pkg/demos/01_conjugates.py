"""
Conjugates of strictly convex costs
===================================

Every agent in the dual problems only ever needs grad f*(y), the point where
f has slope y.  For quadratics it is closed form; for anything else a short
inner solve finds it.
"""

import numpy as np

from dualbridge import (
    BlackBoxFunction,
    ConjugateFunction,
    QuadraticFunction,
    conjugate_hessian,
    verify_conjugate_duality_properties,
)

# (x - 1)^2 written as 1/2 * 2 * (x - 1)^2
f = QuadraticFunction([[2.0]], [1.0])
fs = ConjugateFunction(f)
print("f*(2)       =", fs.value([2.0]))        # y^2/4 + y = 3
print("grad f*(4)  =", fs.gradient([4.0]))     # the point where f' = 4, x = 3
print("hess f*(0)  =", fs.hessian([0.0]))      # inverse of f'' = 2

# %%
# A smooth cost with no closed-form conjugate: softplus plus a ridge.
ridge = 0.5


def value(x):
    return ridge / 2 * x @ x + np.logaddexp(0.0, x).sum()


def gradient(x):
    return ridge * x + 1.0 / (1.0 + np.exp(-x))


def hessian(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return np.diag(ridge + s * (1 - s))


g = BlackBoxFunction(2, value, gradient, hessian, strong_convexity=ridge, lipschitz=ridge + 0.25)
gs = ConjugateFunction(g)
y = np.array([0.8, -1.2])
x, iters = gs.maximizer(y)
print(f"maximizer {x} after {iters} Newton steps; slope there {g.gradient(x)}")
print("conjugate Hessian\n", conjugate_hessian(gs, y))

# %%
# The empirical property check: grad f* is 1/rho-Lipschitz, f* is
# 1/L-strongly convex, and Fenchel-Young holds with equality at y = grad f(x).
rep = verify_conjugate_duality_properties(g, sample_count=200, seed=0)
for key, val in rep.to_dict().items():
    print(f"{key:28s} {val}")
