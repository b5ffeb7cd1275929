import pandas as pd

df = pd.read_csv("iris.csv")
print(round(df["petal_width"].mean(), 2))
