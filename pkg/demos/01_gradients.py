"""Build a tiny LSTM objective with the autodiff engine and check it against central differences.

    python demos/01_gradients.py
"""
import numpy as np

from irlc.core import tensor as T
from irlc.core.gradcheck import gradcheck
from irlc.core.layers import LSTM, ParamStore

rng = np.random.default_rng(0)
store = ParamStore(rng)
lstm = LSTM(store, "demo", 3, 5)
xs = [T.Tensor(rng.normal(size=(2, 3))) for _ in range(4)]
lengths = [4, 2]  # the second sequence stops early
target = rng.normal(size=(2, 5))


def objective():
    h = lstm.run(xs, lengths)
    return T.tsum((h - target) ** 2)


print("loss at init:", objective().item())
errs = gradcheck(objective, lstm.params)
for name, err in sorted(errs.items()):
    print(f"  {name:<20s} relative error {err:.2e}")
print("worst:", max(errs.values()))
