#!/usr/bin/env python3
"""
Bootstrap a development checkout of the Light Field D2GAN Codec

    python setup.py            # venv + full requirements (tests, linters)
    python setup.py --runtime  # venv + runtime requirements only
"""

import argparse
import os
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent
BACKEND = ROOT / "backend"
VENV = ROOT / "venv"

DATA_DIRS = ["data/synthetic", "data/models", "data/output"]


def venv_bin(name: str) -> Path:
    scripts = "Scripts" if os.name == "nt" else "bin"
    return VENV / scripts / name


def run(args, label: str, cwd: Path = ROOT) -> bool:
    """Run a subprocess, print one status line, show stderr on failure"""
    print(f">> {label}...")
    proc = subprocess.run([str(a) for a in args], cwd=cwd, capture_output=True, text=True)
    if proc.returncode != 0:
        print(f"FAIL {label} (exit {proc.returncode})")
        print(proc.stderr.strip() or proc.stdout.strip())
        return False
    print(f"OK {label}")
    return True


def check_python(_: argparse.Namespace) -> bool:
    found = ".".join(map(str, sys.version_info[:3]))
    if sys.version_info < (3, 9):
        print(f"FAIL Python 3.9+ required, running {found}")
        return False
    print(f"OK Python {found}")
    return True


def make_data_dirs(_: argparse.Namespace) -> bool:
    for name in DATA_DIRS:
        (ROOT / name).mkdir(parents=True, exist_ok=True)
    print(f"OK Data directories ready: {', '.join(DATA_DIRS)}")
    return True


def write_env_file(_: argparse.Namespace) -> bool:
    """backend/.env is read by Settings when commands run from backend/"""
    template, target = ROOT / "env.example", BACKEND / ".env"
    if target.exists():
        print(f"OK Keeping existing {target.relative_to(ROOT)}")
        return True
    if not template.exists():
        print("FAIL env.example is missing from the checkout")
        return False
    shutil.copy(template, target)
    print(f"OK Wrote {target.relative_to(ROOT)} (QPs, lambda and training keys live there)")
    return True


def install_packages(args: argparse.Namespace) -> bool:
    if not VENV.exists() and not run([sys.executable, "-m", "venv", VENV], "Creating venv"):
        return False
    manifest = "requirements-simple.txt" if args.runtime else "requirements.txt"
    return run([venv_bin("pip"), "install", "-r", BACKEND / manifest], f"Installing {manifest}")


def check_import(_: argparse.Namespace) -> bool:
    return run([venv_bin("python"), "-c", "import lfcodec.main"], "Importing lfcodec", cwd=BACKEND)


def main():
    parser = argparse.ArgumentParser(description="Set up a development checkout")
    parser.add_argument("--runtime", action="store_true", help="install runtime requirements only")
    args = parser.parse_args()

    print(">> Light Field D2GAN Codec - setup")
    print("=" * 60)

    if not (BACKEND / "lfcodec").is_dir():
        print(f"FAIL backend/lfcodec not found under {ROOT}")
        sys.exit(1)

    steps = [
        ("Python version", check_python),
        ("Data directories", make_data_dirs),
        ("Environment file", write_env_file),
        ("Packages", install_packages),
        ("Package import", check_import),
    ]
    for name, step in steps:
        print(f"\n-- {name}")
        if not step(args):
            print(f"\nFAIL Setup stopped at: {name}")
            sys.exit(1)

    print("\n>> Setup finished")
    print("Next:")
    print("  python test_system.py          # end-to-end smoke test")
    if not args.runtime:
        print("  cd backend && pytest -m 'not slow'")
    print("  see QUICKSTART.md for the synth-data / train / encode / decode / eval / bd chain")


if __name__ == "__main__":
    main()
