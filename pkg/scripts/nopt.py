"""Optimal buffer size along p (beta=0.99) and along beta (p=0.01)."""

from _common import Recipe

if __name__ == "__main__":
    recipe = Recipe(__doc__)
    recipe.emit("nopt_vs_p", "sweep", "nopt_vs_p", "--p", "0.1", "--beta", "0.99",
         "--axis", "p=0.001:1:61:log")
    recipe.emit("nopt_vs_beta", "sweep", "nopt_vs_beta", "--p", "0.01", "--beta", "0.5",
         "--axis", "beta=0.01:0.999:100")
