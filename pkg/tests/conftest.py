import os

# Pin the BLAS pools to one thread before numpy loads. Parallel reductions
# reorder float sums and would break the bit-reproducibility tests.
for _var in (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    os.environ.setdefault(_var, "1")
