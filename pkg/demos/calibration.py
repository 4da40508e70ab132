"""Why temperature scaling matters before letting the engine act alone.

Generates a well-calibrated synthetic confidence source, inflates its logits
threefold (the classic overconfident model), then shows that a single scalar
temperature recovers calibration and that the safe autonomous threshold is
chosen by the failure-rate criterion rather than by eye.

Run:  python3 demos/calibration.py
"""

import numpy as np

from aura import ccar


def main():
    rng = np.random.default_rng(0)
    n = 4000
    logits = rng.normal(0.0, 2.0, n)
    probs = 1.0 / (1.0 + np.exp(-logits))
    outcomes = rng.random(n) < probs

    ece = ccar.expected_calibration_error(probs, outcomes)
    print(f"well-calibrated source: ECE = {ece:.4f}")

    inflated = logits * 3.0
    over = 1.0 / (1.0 + np.exp(-inflated))
    print(f"after x3 logit inflation: ECE = "
          f"{ccar.expected_calibration_error(over, outcomes):.4f}")

    t_star, ece_after = ccar.calibrate_temperature(inflated, outcomes)
    print(f"recovered temperature T* = {t_star:.3f} (true inflation was 3.0)")
    print(f"post-calibration ECE = {ece_after:.4f}")

    calibrated = 1.0 / (1.0 + np.exp(-inflated / t_star))
    theta = ccar.select_threshold(calibrated, outcomes, epsilon=0.05)
    above = calibrated >= theta
    failure_rate = float(np.mean(~outcomes[above]))
    print(f"\nselected autonomous threshold theta = {theta:.2f}")
    print(f"  actions above theta: {int(above.sum())} of {n}")
    print(f"  failure rate above theta: {failure_rate:.4f} (budget 0.05)")

    print("\nreliability diagram (15 bins):")
    bins = np.linspace(0, 1, 16)
    for lo, hi in zip(bins[:-1], bins[1:]):
        mask = (calibrated >= lo) & (calibrated < hi if hi < 1 else calibrated <= hi)
        if not mask.any():
            continue
        bar = "#" * int(40 * outcomes[mask].mean())
        print(f"  [{lo:.2f},{hi:.2f})  n={int(mask.sum()):4d}  "
              f"conf={calibrated[mask].mean():.3f}  acc={outcomes[mask].mean():.3f}  {bar}")


if __name__ == "__main__":
    main()
