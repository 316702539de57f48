"""Hessian growth and sigma_3 along the k = 3, n = 4 Pogorelov-type candidate.

Usage: python3 scripts/gallery_table.py
"""
import numpy as np

from hessianlab.algebra import sigma_k
from hessianlab.barriers import pogorelov_gallery

if __name__ == "__main__":
    u = pogorelov_gallery(3, 4)
    print(f"exponent {u.exponent:.4f}, flat set dimension {u.flat_dimension}")
    print("   |x'|      |D^2u|     sigma_3")
    for rho in np.geomspace(1e-1, 1e-4, 7):
        x = np.array([rho, 0.0, 0.0, 0.1])
        H = u.hessian(x)
        print(f"  {rho:.1e}  {np.linalg.norm(H, 2):10.4f}  {sigma_k(H, 3):.6f}")
