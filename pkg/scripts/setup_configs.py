import os
import json

# Configuration
# Ensures configs are created in the project root's 'data' folder
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(BASE_DIR, "data")
CONFIG_DIR = os.path.join(DATA_DIR, "configs")

os.makedirs(CONFIG_DIR, exist_ok=True)
os.makedirs(os.path.join(DATA_DIR, "sweeps"), exist_ok=True)

print(f"🚀 Writing sweep configs to {CONFIG_DIR}...")

# Reproduction grid shared by the three figures
GRID = {
    "M_list": [2, 3, 4, 5, 6],
    "n_th_list": [0.0, 1.0, 5.0],
    "N_grid": {"min": 1.0, "max": 1000.0, "points": 25, "spacing": "log"},
    "weights": "mean",
    "seed": 0,
}

FIGURES = {
    "fig2": {"objective": "precision", "homodyne": False},
    "fig3": {"objective": "privacy", "homodyne": False},
    "fig4": {"objective": "privacy", "homodyne": True},
}

for name, options in FIGURES.items():
    print(f"- Creating {name}.json ({options['objective']}, homodyne={options['homodyne']})...")
    config = {**GRID, **options, "output": f"sweeps/{name}.csv"}
    with open(os.path.join(CONFIG_DIR, f"{name}.json"), "w") as f:
        json.dump(config, f, indent=4)

# Small grid for a quick smoke run
print("- Creating quick.json...")
quick = {
    "M_list": [2, 4],
    "n_th_list": [0.0, 1.0],
    "N_grid": {"min": 1.0, "max": 100.0, "points": 5, "spacing": "log"},
    "objective": "both",
    "homodyne": True,
    "output": "sweeps/quick.csv",
}
with open(os.path.join(CONFIG_DIR, "quick.json"), "w") as f:
    json.dump(quick, f, indent=4)

print("✅ Configs ready. Run e.g.: python -m privsense sweep --config data/configs/fig3.json")
