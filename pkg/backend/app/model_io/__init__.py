# Checkpoints, sparse export and storage reports
from .checkpoint import Checkpoint, CheckpointMeta, save_checkpoint, load_checkpoint
from .sparse import SparseModel, export_sparse, reconstruct, save_sparse, load_sparse
from .report import storage_report, render_text, render_csv
