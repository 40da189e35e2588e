import pandas as pd

import config
from simulation import ScenarioSpec, generate_scenario

# Configuration
ROWS = config.DEFAULT_N
BETA_STAR = config.DEFAULT_BETA_STAR
RHO = config.DEFAULT_RHO
SIGMA = config.DEFAULT_SIGMA
SEED = 42
OUTPUT = "synthetic_scenario_dataset.csv"

spec = ScenarioSpec(n=ROWS, beta_star=BETA_STAR, rho=RHO, sigma=SIGMA, seed=SEED)
scenario = generate_scenario(spec)

# Create DataFrame with the response as the last column
df = pd.DataFrame(scenario.data.X, columns=list(scenario.data.feature_names))
df["y"] = scenario.data.y

# Save CSV
df.to_csv(OUTPUT, index=False, lineterminator="\n")

print("Dataset created:")
print(f"- Rows: {ROWS}")
print(f"- Predictors: {spec.p}")
print(f"- True support: {[name for name, b in zip(scenario.data.feature_names, BETA_STAR) if b != 0]}")
print(f"Saved as: {OUTPUT}")
print(f"Try: python cli.py fit --data {OUTPUT} --response y --penalty scad --cv --out run/")
