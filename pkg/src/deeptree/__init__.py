"""Graph-to-tree conversion and tree-LSTM vertex classification."""

from .graph import (
    DatasetFormatError,
    DatasetSplit,
    FeatureVector,
    Graph,
    graph_from_json,
    graph_to_json,
    induced_subgraph,
    load_citation_dataset,
    load_dataset,
    make_graph,
    save_dataset,
    split,
    total_degree,
    undirected_neighbors,
)
from .model import (
    ModelParams,
    backward_tree,
    forward_node,
    forward_tree,
    gradient_check,
    init_params,
    load_checkpoint,
    loss,
    node_input,
    predict,
    save_checkpoint,
    trace_loss,
)
from .training import (
    DEFAULT_RATIOS,
    METHODS,
    ExperimentRecord,
    TrainConfig,
    TrainingDiverged,
    benchmark,
    build_trees,
    macro_f1,
    micro_f1,
    train,
)
from .treegen import (
    DeepTree,
    TreeNode,
    generate_bfs_tree,
    generate_deep_tree,
    tree_from_json,
    tree_stats,
    tree_to_json,
)

__version__ = "0.1.0"
