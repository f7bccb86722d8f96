"""Level-1 ratio against segment length for two memory dephasing times."""

from _common import Recipe

if __name__ == "__main__":
    recipe = Recipe(__doc__)
    recipe.emit("distance", "sweep", "distance", "--axis", "L0=1:150:150",
         "--tau-m-list", "1e-4,1e-3", "--la", "20", "--c", "2e8")
