from surfeat import show_versions
from surfeat._show_versions import _get_deps_info, _get_numeric_info, _get_sys_info


def test_get_numeric_info():
    numeric_info = _get_numeric_info()
    assert "numpy" in numeric_info
    assert "scipy" in numeric_info
    assert "BLAS[numpy]" in numeric_info


def test_get_sys_info():
    sys_info = _get_sys_info()

    assert "python" in sys_info
    assert "executable" in sys_info
    assert "machine" in sys_info


def test_get_deps_info():
    deps_info = _get_deps_info()

    assert "xarray" in deps_info
    assert "pandas" in deps_info
    assert "matplotlib" in deps_info
    assert "trimesh" in deps_info
    assert "scikit-learn" in deps_info
    assert "click" in deps_info
    assert "appdirs" in deps_info


def test_show_versions(capsys):
    show_versions()
    out, err = capsys.readouterr()
    assert "System" in out
    assert "python" in out
    assert "Numeric deps" in out
    assert "surfeat" in out
    assert "Python deps" in out
