"""
FKWC
Depth-rank k-sample tests for equality of covariance operators of functional data
"""
