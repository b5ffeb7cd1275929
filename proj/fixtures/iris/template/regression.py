import pandas as pd
import numpy as np
from sklearn.model_selection import train_test_split
from sklearn.linear_model import LinearRegression
from sklearn import metrics

# read csv file
# Take X as petal length
# Take y as petal width
# Split train and test with 30% test data (random_state=42)
# use regression from scikit learn
# find b and round off to 2 decimal places
# find a and round off to 2 decimal places

new_pw = 5.3  # new x value

# calculate y
new_pl = print(round(new_pl, 2))  # round off to 2 decimal places
