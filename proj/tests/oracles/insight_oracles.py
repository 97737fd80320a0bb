"""Reference statistics for the insight tests (scipy)."""
import numpy as np
from scipy import stats

g = [[1.0, 2.0, 3.0, 2.5], [4.0, 5.5, 5.0], [2.0, 2.2, 9.0, 1.0, 3.3]]
f, p = stats.f_oneway(*g)
print("anova f", repr(f), "p", repr(p))

a = [1.0, 2.0, 3.5, 2.2, 1.9]
b = [3.0, 4.1, 2.9, 5.0, 4.4, 3.8, 6.0]
t, p = stats.ttest_ind(a, b, equal_var=False)
print("welch t", repr(t), "p", repr(p))
