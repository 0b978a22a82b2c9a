################################################################################
# Module: settings.py
# Description: Various settings used across the package
# License: MIT, see full license in LICENSE.md
# Web: https://github.com/prototypal/prototypal
################################################################################

import logging as lg

# locations to save data and logs
data_folder = 'data'
logs_folder = 'logs'

# write log to file and/or to console (console means standard error)
log_file = False
log_console = False
log_level = lg.INFO
log_name = 'prototypal'
log_filename = 'prototypal'

# ground cost and similarity
default_metric = 'squared_euclidean'
metric_kinds = ('squared_euclidean', 'euclidean', 'manhattan',
                'cosine_distance', 'precomputed')
# default beta is max(C) + beta_margin
beta_margin = 1.0

# tolerances
simplex_tol = 1e-9

# exhaustive search guard (number of enumerated subsets)
brute_force_limit = 10 ** 6

# transport solvers
exact_ot_max_cells = 400
sinkhorn_reg_factor = 0.1
sinkhorn_max_iters = 10000
sinkhorn_tol = 1e-6
# below this reg / max(C) ratio, Sinkhorn runs in the log domain
sinkhorn_log_threshold = 0.05

# ProtoDash weight refit
protodash_max_iters = 1000
protodash_tol = 1e-8

# Gaussian kernel widths tried by select_kernel_width
kernel_width_grid = (0.1, 0.5, 1, 5, 10)
default_kernel_width = 1.0

# worker processes for independent experiment runs (-1 means all cores)
processors = 1

# selector names understood by the experiment runner and the command line
selection_methods = ('spot_greedy', 'spot_simple', 'mmd_critic', 'protodash',
                     'mmd_critic+ot', 'protodash+ot', 'random')
