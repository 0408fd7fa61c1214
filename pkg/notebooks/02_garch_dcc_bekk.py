# %% [markdown]
# # Conditional variance models on simulated returns
#
# A univariate GARCH(1,1), a DCC model for two series and a full BEKK(1,1)
# fit where one volatility channel is planted.

# %%
import numpy as np

from volspill import classify_direction, fit_bekk, fit_dcc, fit_garch11, mean_dynamic_correlation
from volspill.bekk import BekkParams, intercept_for_covariance, simulate_bekk
from volspill.dcc import simulate_dcc
from volspill.garch import GarchParams, simulate_garch

r = simulate_garch(GarchParams(1e-6, 0.05, 0.90), 4000, rng=3)
g = fit_garch11(r)
print("GARCH estimates:", g.params)

# %%
q_bar = np.array([[1.0, 0.4], [0.4, 1.0]])
pair = simulate_dcc([GarchParams(1e-6, 0.05, 0.9)] * 2, 0.03, 0.95, q_bar, 3000, rng=4)
d = fit_dcc(pair)
print("DCC estimates:", d.params)
print("mean dynamic correlation and its t-statistic:", mean_dynamic_correlation(d, 0, 1))

# %% [markdown]
# In the BEKK parameterization ``a[j, i]`` carries the effect of market
# ``j``'s lagged shock on market ``i``'s variance. We plant ``a[1, 0]``.

# %%
a = np.array([[0.3, 0.0], [0.15, 0.3]])
b = 0.9 * np.eye(2)
c = intercept_for_covariance(a, b, np.eye(2) * 1e-4)
eps = simulate_bekk(BekkParams(c, a, b), 4000, rng=5)
fit = fit_bekk(eps)
for label, est, se, t, p in fit.coefficient_table():
    print(f"{label:>8} {est:9.4f}  t={t:7.2f}")
print(classify_direction(fit, 0, 1))
