import pandas as pd

# read csv file
# take the petal_width column
# find the average petal width
# print the average rounded off to 2 decimal places
