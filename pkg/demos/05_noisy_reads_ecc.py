#!/usr/bin/env python3
"""Reconcile noisy hardware reads against the server's clean derivation.

Hardware reads pick up amplifier and quantization noise; the server's
software clone of the timers is noiseless, so the two keys can disagree
in a few positions.  Rather than retrying the whole exchange, the user
broadcasts the 28-bit polynomial remainder of its key.  The remainder
leaks 28 bits, so the key is read 284 bits long and both sides keep
only the 256-bit effective prefix.  This script walks one
reconciliation by hand, then sweeps failure rates with and without it.
"""

import numpy as np

from timekey import CrcConfig, analysis, ecc

cfg = CrcConfig.default(op_cap=200_000)
print(f"generator polynomial: degree {cfg.degree}, low coefficients "
      f"0x{cfg.poly_hex}")
print(f"key length {cfg.key_len}, effective {cfg.effective_len}, "
      f"correction budget {cfg.hd_budget} bit flips\n")

rng = np.random.default_rng(314)
user_key = rng.integers(0, 2, cfg.key_len, dtype=np.uint8)
server_key = user_key.copy()
flipped = rng.choice(cfg.key_len, size=3, replace=False)
server_key[flipped] ^= 1  # noise flipped three of the user's read bits

r_user = ecc.crc(user_key, cfg)
print("user broadcasts its remainder:", r_user.to_hex())
fixed = ecc.reconcile(server_key, r_user, cfg)
print(f"server's copy disagreed at positions {sorted(map(int, flipped))}")
print(f"reconciled key equals the user's: {bool(np.array_equal(fixed, user_key))}")
print(f"both sides now keep the first {cfg.effective_len} bits.\n")

snrs = (100.0, 110.0, 120.0, 130.0, 140.0)
print(f"exchange failure percentage, 12-bit reads, {cfg.key_len}-bit keys,")
print("400 keys per cell, identical noise with and without reconciliation")
plain = analysis.noise_failure_study([12], snrs, keys_per_cell=400, seed=9,
                                     N=cfg.key_len)
with_ecc = analysis.noise_failure_study([12], snrs, keys_per_cell=400, seed=9,
                                        N=cfg.key_len, ecc=cfg)
print(f"{'snr (dB)':>9} {'plain':>8} {'reconciled':>11}")
for p, f in zip(plain, with_ecc):
    print(f"{p['snr_db']:9.0f} {p['failure_pct']:8.2f} {f['failure_pct']:11.2f}")

print("\nreconciliation never hurts: it runs on the same noise draws and")
print("only succeeds when the corrected key matches the user's exactly.")
print("Past a few flipped bits it gives up fast (the search is capped),")
print("and a retry costs one more exchange, never a wrong key.")
