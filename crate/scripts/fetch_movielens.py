#!/usr/bin/env python3
"""Materialise MovieLens-100k `u.data` under data/ml-100k/.

The ratings table ships inside the pytorch-widedeep wheel as a parquet file.
This script downloads that wheel with pip (no install), reads the table and
writes the original tab-separated layout: user_id, item_id, rating, timestamp.
"""
import glob
import io
import os
import subprocess
import sys
import tempfile
import zipfile

import pandas as pd

MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_data.parquet.brotli"


def main() -> int:
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    out_dir = os.path.join(root, "data", "ml-100k")
    out = os.path.join(out_dir, "u.data")
    if os.path.exists(out):
        print(f"{out} already present")
        return 0
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call(
            [sys.executable, "-m", "pip", "download", "--no-deps", "pytorch-widedeep==1.7.0", "-d", tmp]
        )
        wheel = glob.glob(os.path.join(tmp, "pytorch_widedeep-*.whl"))[0]
        with zipfile.ZipFile(wheel) as z:
            df = pd.read_parquet(io.BytesIO(z.read(MEMBER)))
    os.makedirs(out_dir, exist_ok=True)
    df[["user_id", "movie_id", "rating", "timestamp"]].to_csv(out, sep="\t", header=False, index=False)
    print(f"wrote {len(df)} ratings to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
