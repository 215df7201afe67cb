#!/usr/bin/env python3
"""Score pipeline-generated keys against a five-test statistical battery.

Generates batches of 256-bit keys straight from the timer pipeline at
several ADC resolutions and runs each key through frequency, block
frequency, runs, longest-run and cumulative-sums tests at the 1% level.
A seeded PRNG provides the ceiling: no physical source can beat it, a
healthy one should tie it.  Coarse quantization is where the pipeline
gives ground.
"""

import numpy as np

from timekey import randomness

KEYS = 2000
BITS = [4, 6, 9, 12, 16]

print(f"pass percentage per test, {KEYS} keys of 256 bits each, alpha=0.01\n")

baseline = {r["test_name"]: r["pass_pct"]
            for r in randomness.prng_baseline(KEYS, seed=5)}
rows = randomness.pass_percentage_sweep(BITS, KEYS, seed=5)
by_bits = {}
for r in rows:
    by_bits.setdefault(r["adc_bits"], {})[r["test_name"]] = r["pass_pct"]

names = list(baseline)
header = f"{'test':>18} " + "".join(f"{f'b={b}':>8}" for b in BITS) + f"{'prng':>8}"
print(header)
for name in names:
    cells = "".join(f"{by_bits[b][name]:8.1f}" for b in BITS)
    print(f"{name:>18} {cells}{baseline[name]:8.1f}")

worst = {b: min(by_bits[b][n] - baseline[n] for n in names) for b in BITS}
print(f"\nworst gap to the prng ceiling per resolution:")
for b in BITS:
    print(f"  b={b:>2}: {worst[b]:+6.1f} points")

print("\nsingle-key view: one 12-bit key through the full battery")
key = randomness.generate_key_batch(1, adc_bits=12,
                                    rng=np.random.default_rng(5))[0]
report = randomness.run_battery(key)
for res in report.per_test.values():
    flag = "pass" if res.passed else "FAIL"
    print(f"  {res.name:>18}: p={res.p_value:.4f}  {flag}")
print(f"  overall: {'pass' if report.overall_pass else 'FAIL'}")

print("\nat 4 bits the quantizer exposes so few current steps that key bits")
print("inherit structure and every frequency-flavored test notices; from 9")
print("bits up the pipeline is statistically indistinguishable from the prng.")
