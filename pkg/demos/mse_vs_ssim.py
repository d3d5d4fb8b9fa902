"""
Equal MSE, different structure
==============================

Each distortion is tuned until its MSE hits the same target.  The SSIM
distances then separate a brightness shift from noise.
"""

from ssimgen import imgio
from ssimgen.cli import BENCH_HEADER, bench_rows

image = imgio.synth("bars-stripes", 128, 1, 0)[0]
# leave room at both ends of the range so shifts and noise are not clipped
image = imgio.with_headroom(image, 0.25)

print(" ".join(f"{h:>14}" for h in BENCH_HEADER))
for row in bench_rows(image, target=400.0, seed=0, window=8, stride=1):
    print(f"{row[0]:>14} " + " ".join(f"{v:14.4f}" for v in row[1:]))
