"""Four-message ring-LWE random oblivious transfer between two sessions.

The receiver picks b; after the exchange the sender holds (m0, m1) and the
receiver holds m_b.  MSG1 does not depend on b.

Caveat: both keys are derived from the same reconciled value, so a curious
receiver can compute m_{1-b} as well.  This instantiation demonstrates
correctness and the message flow; it is not oblivious against the receiver.

Run: python demos/03_rlwe_oblivious_transfer.py
"""

import os

import numpy as np

from qtpm import rot

params = rot.DEFAULT_PARAMS
print(f"ring n={params.ring.n} q={params.ring.q}; MSG1 {params.msg1_bytes} B, MSG2 {params.msg2_bytes} B")

seed = os.urandom(32)
print("MSG1 identical for b=0 and b=1:", rot.RotSession(seed).msg1(0) == rot.RotSession(seed).msg1(1))

for b in (0, 1):
    receiver = rot.RotSession(os.urandom(32))
    sender = rot.RotSession(os.urandom(32))
    msg1 = receiver.msg1(b)
    msg2 = sender.msg2(msg1)
    msg3, got = receiver.msg3(msg2)
    keys = sender.msg4(msg3)
    print(f"b={b}: m_b == m{b}: {got.message == keys[b]}, m_b != m{1 - b}: {got.message != keys[1 - b]}")

# reconciliation tolerates any even disagreement smaller than q/8
q = params.ring.q
v = np.arange(q)
sigma = rot.signal(v, q)
shifted = rot.mod2(v + 2 * (q // 16 - 1), sigma, q)
print("Mod2 stable under an even shift of", 2 * (q // 16 - 1), ":", np.array_equal(shifted, rot.mod2(v, sigma, q)))

try:
    receiver.msg3(msg2)
except rot.RotPhaseError as e:
    print("replay rejected:", e)
