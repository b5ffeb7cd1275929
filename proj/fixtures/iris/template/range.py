import pandas as pd

# read csv file
# take the petal_width column
# find the range (maximum - minimum) of petal width
# print the range rounded off to 2 decimal places
