"""Randomized pointwise-identity suite.

The solvers lean on a handful of exact linear-algebra facts: the top
eigenvalue's first and second derivative formulas, determinant
superadditivity for PSD matrices, the wedge pairing with the J action, and
J^2 = (-1)^p on forms.  Each is checked against an independent oracle
(central differences, brute-force enumeration, or direct evaluation).

Run:  python demos/06_identity_suite.py
"""

from acmax import identity_suite

out = identity_suite(seed=0, eig_samples=100, det_samples=1000, wedge_samples=100)

print("top-eigenvalue derivatives vs central differences:")
eig = out["eig_top_derivatives"]
print(f"  gradient rel err {eig['grad_rel_err']:.2e}, "
      f"curvature rel err {eig['curv_rel_err']:.2e} over {eig['samples']} matrices")

det = out["det_superadditivity"]
print(f"det(A+B) >= det A + det B on {det['samples']} random PSD pairs: "
      f"min slack {det['min_slack']:.2e}")

wed = out["wedge_j_identity"]
print(f"alpha ^ J beta = (-1)^p J alpha ^ beta on {wed['samples']} form pairs: "
      f"sup residual {wed['sup_residual']:.2e}")

j2 = out["j_squared_on_forms"]
print(f"J^2 = (-1)^p on 1- and 2-forms: sup residual {j2['sup_residual']:.2e}")

print(f"\nsuite passed: {out['passed']}")
