#!/usr/bin/env python3
"""
Test runner for superapprox.
Runs static analysis, the unit suite with coverage, and the slow acceptance benchmarks.
"""

import os
import subprocess
import sys
from pathlib import Path


def run_command(cmd, description):
    """Run a command and handle errors."""
    print(f"🔍 {description}...")
    try:
        subprocess.run(cmd, shell=True, check=True, capture_output=True, text=True)
        print(f"✅ {description} passed")
        return True
    except subprocess.CalledProcessError as e:
        print(f"❌ {description} failed")
        print(f"Error: {e.stdout}{e.stderr}")
        return False


def main():
    """Run all tests and checks."""
    print("🚀 superapprox - Test Suite")
    print("=" * 60)

    project_root = Path(__file__).parent
    os.chdir(project_root)

    all_passed = True

    print("\n📋 Step 1: Static Analysis")
    print("-" * 40)

    if not run_command("poetry run ruff check superapprox/ tests/ benchmarks/", "Ruff linting"):
        all_passed = False

    if not run_command("poetry run mypy superapprox/", "MyPy type checking"):
        all_passed = False

    if not run_command(
        "poetry run black --check --diff superapprox/ tests/ benchmarks/",
        "Black formatting check",
    ):
        all_passed = False

    print("\n🧪 Step 2: Unit and Property Tests")
    print("-" * 40)

    if not run_command("poetry run pytest -m 'not slow'", "Pytest with coverage"):
        all_passed = False

    print("\n⏱️  Step 3: Acceptance Runs")
    print("-" * 40)

    if not run_command(
        "poetry run pytest -m slow tests/ benchmarks/ --no-cov", "Slow acceptance tests"
    ):
        all_passed = False

    print("\n🔄 Step 4: CLI Smoke Test")
    print("-" * 40)

    if not run_command(
        "poetry run superapprox survey --gens sl2 --moduli 3,5,7 --no-timings",
        "Survey from the command line",
    ):
        all_passed = False

    print("\n" + "=" * 60)
    if all_passed:
        print("🎉 All checks passed.")
        sys.exit(0)
    else:
        print("❌ Some checks failed. Please fix the issues above.")
        sys.exit(1)


if __name__ == "__main__":
    main()
