"""Exact level-1 ratio against the 3.6/p small-(p, beta) estimate at beta=0.1."""

from _common import Recipe

if __name__ == "__main__":
    recipe = Recipe(__doc__)
    recipe.emit("ratio_asymptote", "sweep", "ratio_asymptote", "--p", "0.1", "--beta", "0.1",
         "--axis", "p=0.001:0.2:20:log")
