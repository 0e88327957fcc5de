"""测试公共 fixture"""

import os

import pytest

from paul_junction.core.mathieu import default_boundary_curves


@pytest.fixture(scope="session", autouse=True)
def isolated_cache(tmp_path_factory):
    """边界曲线缓存写到临时目录，不污染 ~/.paul-junction"""
    cache = tmp_path_factory.mktemp("cache")
    previous = os.environ.get("PAUL_JUNCTION_CACHE_DIR")
    os.environ["PAUL_JUNCTION_CACHE_DIR"] = str(cache)
    yield cache
    if previous is None:
        os.environ.pop("PAUL_JUNCTION_CACHE_DIR", None)
    else:
        os.environ["PAUL_JUNCTION_CACHE_DIR"] = previous


@pytest.fixture(scope="session")
def curves(isolated_cache):
    return default_boundary_curves()


@pytest.fixture(scope="session")
def peregrine_grid():
    """粗网格（z 方向 2 µm 步长），足够定位零点"""
    from paul_junction.core.electrodes import GridSpec, generate_rect_electrode_grid, peregrine_junction

    spec = GridSpec.centered(box=(200.0, 200.0, 40.0), dims=(11, 11, 21))
    return generate_rect_electrode_grid(peregrine_junction(), spec).unwrap()
