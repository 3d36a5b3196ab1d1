"""The Garding constant away from and across horizons.

For each grid the script computes the smallest C with
||psi||_{W^{1,2}}^2 <= C (||H psi||^2 + ||psi||^2) on the reduced space.
Away from the horizons C settles as the grid is refined.  On a region that
contains both horizons of the charged 2+1 family the symbol degenerates, and
C grows like 1/h^2.
"""

from dirac_bvp import assemble_hamiltonian, ef_charged_3d, garding_estimate, radial_grid

closure = ef_charged_3d(1.0, 0.8)          # horizons at r = 0.4 and r = 1.6
for label, lo, hi, faces, sizes in (
        ("r in [3, 6]   (no horizon)", 3.0, 6.0, ("chiral", "chiral"), (32, 64, 128, 256)),
        ("r in [0.3, 2.2] (two horizons)", 0.3, 2.2, ("chiral", "open"), (16, 32, 64, 128))):
    print(label)
    prev = None
    for n in sizes:
        H = assemble_hamiltonian(radial_grid(closure, lo, hi, n, k=1, faces=faces), closure, m=0.5)
        c = garding_estimate(H)
        ratio = f"  ratio {c / prev:5.2f}" if prev else ""
        print(f"  n = {n:4d}   C = {c:10.3f}{ratio}")
        prev = c
