SMALL_CONFIG_TEXT = """version = 1
architecture = mlp-ablation
feature_dim = 4
n_objects = 10
n_points = 32
allow_any_size = true
epochs = 1
batch_size = 4
seeds = 0,1
"""
