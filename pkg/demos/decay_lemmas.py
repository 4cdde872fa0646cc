# # Differential inequalities on sampled data
#
# Three facts turn energy identities into decay rates:
#
# 1. f' <= -a^-alpha f^n gives an algebraic bound on f from the integral of a.
# 2. A chain f' <= -g, g' <= -h with f <= C t^-n makes g and h decay faster
#    on average, by one and two powers of t.
# 3. Averaged decay E t^-n is enough to integrate f^alpha over [1, T].
#
# Each check first tests its hypothesis on the samples and reports
# "not_applicable" when it fails, so bad data cannot produce a pass.

import numpy as np

from stratflow import lemmas

t = np.linspace(1.0, 50.0, 4901)
tr = lemmas.Trajectory

# ## The power chain
#
# f = t^-2 with its exact first and second derivatives is the extremal case.

n = 2.0
f, g, h = t**-n, n * t ** -(n + 1), n * (n + 1) * t ** -(n + 2)
res = lemmas.lemma22_check(tr(t, f), tr(t, g), tr(t, h), n, C=1.0, rel_slack=1e-3)
cg, ch = lemmas.lemma22_constants(n)
print(f"constants for n = {n:g}: g {cg:g} C t^-{n + 1:g}, h {ch:g} C t^-{n + 2:g}")
print(f"g: {res.g.status} (margin {res.g.margin:.3f}),  h: {res.h.status} (margin {res.h.margin:.3f})")

# Break the hypothesis at one sample and the verdict changes to
# not_applicable rather than to a pass.

g_bad = g.copy()
g_bad[500] *= 1e6
res = lemmas.lemma22_check(tr(t, f), tr(t, g_bad), tr(t, h), n, C=1.0, rel_slack=1e-3)
print(f"inflated g: {res.g.status} ({res.g.note})")

# ## From averaged decay to integrability

E = lemmas.averaged_constant(1.0, n) * (1 + 1e-4)
v = lemmas.lemma23_check(tr(t, f), n, E, alpha=1.0)
print(f"\nint_1^50 t^-2 = {v.value:.4f} <= {v.bound:.4f}: {v.status}")
print(f"dyadic checkpoints {lemmas.dyadic_points(50.0)}")

# ## Exponent fitting
#
# A pure exponential looks like a steep power law only once rate * t is
# large. Over a window where it is not, the log-log slope is shallow; this
# is what a slowly decaying linear mode does to a fitted rate.

for rate in (0.02, 0.2):
    fit = lemmas.fit_power_law(tr(t, np.exp(-rate * t)), 10, 50)
    print(f"exp(-{rate} t) on [10, 50]: slope {fit.exponent:.2f}")
