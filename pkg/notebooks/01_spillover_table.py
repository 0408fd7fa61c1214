# %% [markdown]
# # Spillover table from a simulated volatility panel
#
# We simulate five range-volatility series from a VAR(1) in which the first
# market leads the second, then read the connectedness table off a VAR(4) fit.

# %%
import numpy as np

from volspill import VolatilityPanel, spillover_pipeline
from volspill.simulate import simulate_var

coefs = 0.4 * np.eye(5)
coefs[1, 0] = 0.3  # yesterday's market-0 volatility feeds market 1
vol = np.abs(simulate_var(np.full(5, 10.0), [coefs], np.eye(5), 1000, rng=1))
panel = VolatilityPanel.from_array(vol, ["m0", "m1", "m2", "m3", "m4"], "2017-03-01")

# %%
table = spillover_pipeline(panel, p=4, H=10)
print(table.to_csv(digits=4))

# %% [markdown]
# Market 0 should be the largest net transmitter and market 1 the largest
# net receiver. Net values always sum to zero.

# %%
for name, net in zip(table.names, table.net):
    print(f"{name}: net {net:+.2f}")
print(f"sum of net: {table.net.sum():.1e}")
