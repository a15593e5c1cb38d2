"""
Five estimators on six benchmark tables
========================================

Weighted ratio regression against the hyperbolic model, Chao's lower
bound, Chao-Bunge and zero-truncated negative binomial ML. Invalid
results are shown in parentheses with their reason.
"""

from ratiopop import (
    DATASETS,
    chao_bunge_estimate,
    chao_estimate,
    default_cutoff,
    hm_estimate,
    load_dataset,
    wlrm_estimate,
    ztnb_mle_estimate,
)


def show(res):
    if res.valid:
        return f"{res.N_hat:9.0f}"
    return f"({res.N_hat:7.0f})" if res.N_hat == res.N_hat else "        *"


print(f"{'data':<12} {'n':>6} {'m':>3} {'WLRM':>9} {'HM':>9} {'Chao':>9} {'C-B':>9} {'ML':>9}")
for name in DATASETS:
    t = load_dataset(name)
    m = default_cutoff(t)
    row = [wlrm_estimate(t, m), hm_estimate(t, m), chao_estimate(t),
           chao_bunge_estimate(t, 10), ztnb_mle_estimate(t)]
    print(f"{name:<12} {t.n:6.0f} {m:3d} " + " ".join(show(r) for r in row))

# reasons for the failures
print()
for name in DATASETS:
    t = load_dataset(name)
    for r in (chao_bunge_estimate(t, 10), ztnb_mle_estimate(t)):
        if not r.valid:
            print(f"{name}: {r.method} {r.reason}")
