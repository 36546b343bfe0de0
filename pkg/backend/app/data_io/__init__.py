# Dataset ingestion: IDX files, synthetic blobs, seeded splits
from .datasets import Dataset, synthetic_blobs, split
from .idx import load_idx, write_idx
