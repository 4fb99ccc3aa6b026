"""Why the dense layer cannot scale to clinical grids.

Prints the dense-layer weight count and storage for the simulated setup
and for a clinical 512x512 / 360-view / 768-detector scan.
"""

from fcbp import memory_report

for label, args in [
    ("simulated 64x64 scan  ", (64, 90, 128, 4)),
    ("clinical 512x512 scan ", (512, 360, 768, 4)),
]:
    r = memory_report(*args)
    print(f"{label}: {r.n_weights:>15,d} weights ({r.human_weights:>8}) "
          f"-> {r.human_bytes:>9} at 4 bytes/weight")

print()
print("The clinical case needs two orders of magnitude more storage than a")
print("consumer accelerator offers, which is why the dense layer is only a")
print("laboratory object: its learned behavior (back projection) can be")
print("replaced by the analytic operator at full resolution.")
