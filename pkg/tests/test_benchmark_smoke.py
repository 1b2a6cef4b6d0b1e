import subprocess
import sys
from pathlib import Path

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


def test_benchmark_runs():
    res = subprocess.run([sys.executable, str(BENCH), "--steps", "200", "--repeat", "1"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0, res.stderr
    assert "example1" in res.stdout and "python" in res.stdout
