"""Select the compiled kernels when available, else the numpy fallback.

Set ``ECKO_PURE_PYTHON=1`` before import to force the fallback.
"""
import os

from . import _fallback

NAME = "python"
cd_lasso_gram = _fallback.cd_lasso_gram
ward_agglomerate = _fallback.ward_agglomerate

if not os.environ.get("ECKO_PURE_PYTHON"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        NAME = "cython"
        cd_lasso_gram = _kernels.cd_lasso_gram
        ward_agglomerate = _kernels.ward_agglomerate
