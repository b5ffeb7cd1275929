import pandas as pd

df = pd.read_csv("iris.csv")
pw = df["petal_width"]
print(round(pw.max() - pw.min(), 2))
