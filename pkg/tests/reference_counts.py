"""Frozen confusion counts for the three-layer reference report row.

Constructed by exact rational arithmetic: each binary layer's matrix
[[a, b], [c, d]] shares its off-diagonal total s = b + c between the two
class IoUs, a/(a+s) and d/(d+s). Choosing s as the product of the reduced
denominators makes both IoUs exact decimals, so the layer mIoUs display as
71.5 / 97.8 / 97.9 while the exact average stays at 89.03.
"""

REFERENCE_MATRICES = [
    [[17853, 5000], [4647, 34203]],    # IoUs 0.6492, 0.7800 -> mIoU 0.7146
    [[617, 5], [3, 242]],              # IoUs 0.9872, 0.9680 -> mIoU 0.9776
    [[776051, 4500], [4449, 276051]],  # IoUs 0.9886, 0.9686 -> mIoU 0.9786
]
