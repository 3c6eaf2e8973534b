#!/usr/bin/env python3
"""
Test runner for the Pump-Probe Harmonic Solver.
Runs all tests or one category: unit, oracle, spectroscopy or cli.
"""

import sys
import os
import argparse
import unittest
import time
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

CATEGORIES = {
    'unit': [
        'test_system.py', 'test_harmonic_solver.py', 'test_term_algebra.py',
        'test_models.py', 'test_system_file.py', 'test_validation.py',
    ],
    'oracle': ['test_time_domain.py'],
    'spectroscopy': ['test_spectroscopy.py'],
    'cli': ['test_cli.py'],
}


def is_slow(test) -> bool:
    """True for tests carrying the pytest ``slow`` marker."""
    method = getattr(test, getattr(test, '_testMethodName', ''), None)
    return any(mark.name == 'slow' for mark in getattr(method, 'pytestmark', []))


def iter_tests(suite):
    for item in suite:
        if isinstance(item, unittest.TestSuite):
            yield from iter_tests(item)
        else:
            yield item


def discover(files, pattern=None, fast=False):
    """Collect the tests of ``files``, optionally dropping slow ones."""
    loader = unittest.TestLoader()
    if pattern:
        loader.testNamePatterns = [pattern]

    test_dir = Path(__file__).parent
    suite = unittest.TestSuite()
    for name in files:
        discovered = loader.discover(str(test_dir), pattern=name, top_level_dir=str(test_dir.parent))
        for test in iter_tests(discovered):
            if fast and is_slow(test):
                continue
            suite.addTest(test)
    return suite


def run_category(category, verbosity=2, pattern=None, fast=False):
    """Run one test category."""
    icons = {'unit': '🧪', 'oracle': '⏱️ ', 'spectroscopy': '📈', 'cli': '🖥️ '}
    print(f"{icons[category]} Running {category.capitalize()} Tests...")
    runner = unittest.TextTestRunner(verbosity=verbosity)
    return runner.run(discover(CATEGORIES[category], pattern, fast))


def run_all_tests(verbosity=2, pattern=None, fast=False):
    """Run all tests."""
    print("🚀 Running All Tests...")
    files = [name for names in CATEGORIES.values() for name in names]
    runner = unittest.TextTestRunner(verbosity=verbosity)
    return runner.run(discover(files, pattern, fast))


def run_specific_test_file(test_file, verbosity=2, fast=False):
    """Run a specific test file."""
    print(f"🎯 Running specific test file: {test_file}")

    if not test_file.endswith('.py'):
        test_file += '.py'

    test_path = Path(__file__).parent / test_file
    if not test_path.exists():
        print(f"❌ Test file not found: {test_path}")
        return None

    runner = unittest.TextTestRunner(verbosity=verbosity)
    return runner.run(discover([test_path.name], fast=fast))


def print_test_summary(result, test_type):
    """Print a summary of test results."""
    print(f"\n{'='*60}")
    print(f"📊 {test_type} Test Summary")
    print(f"{'='*60}")

    if hasattr(result, 'testsRun'):
        print(f"Tests run: {result.testsRun}")

    if hasattr(result, 'failures') and result.failures:
        print(f"❌ Failures: {len(result.failures)}")
        for test, traceback in result.failures:
            print(f"  - {test}: {traceback.split('AssertionError:')[-1].strip()}")

    if hasattr(result, 'errors') and result.errors:
        print(f"💥 Errors: {len(result.errors)}")
        for test, traceback in result.errors:
            print(f"  - {test}: {traceback.strip().splitlines()[-1]}")

    if hasattr(result, 'skipped') and result.skipped:
        print(f"⏭️  Skipped: {len(result.skipped)}")
        for test, reason in result.skipped:
            print(f"  - {test}: {reason}")

    if hasattr(result, 'wasSuccessful'):
        success = result.wasSuccessful()
        print(f"🎯 Overall Result: {'✅ PASSED' if success else '❌ FAILED'}")

    print(f"{'='*60}\n")


def main():
    """Main test runner function."""
    parser = argparse.ArgumentParser(description='Run tests for the Pump-Probe Harmonic Solver')
    parser.add_argument(
        '--type',
        choices=list(CATEGORIES) + ['all'],
        default='all',
        help='Category of tests to run (default: all)'
    )
    parser.add_argument(
        '--file',
        help='Run a specific test file'
    )
    parser.add_argument(
        '--pattern',
        help='Test name pattern to match (e.g., "*oracle*")'
    )
    parser.add_argument(
        '--verbosity',
        type=int,
        choices=[0, 1, 2],
        default=2,
        help='Test output verbosity (default: 2)'
    )
    parser.add_argument(
        '--fast',
        action='store_true',
        help='Skip tests marked slow (oracle runs, acceptance spectra)'
    )

    args = parser.parse_args()

    start_time = time.time()

    try:
        if args.file:
            result = run_specific_test_file(args.file, args.verbosity, args.fast)
            if result:
                print_test_summary(result, f"File: {args.file}")
        elif args.type == 'all':
            result = run_all_tests(args.verbosity, args.pattern, args.fast)
            print_test_summary(result, "All Tests (Fast Mode)" if args.fast else "All Tests")
        else:
            result = run_category(args.type, args.verbosity, args.pattern, args.fast)
            print_test_summary(result, f"{args.type.capitalize()} Tests")

        duration = time.time() - start_time
        print(f"⏱️  Total execution duration: {duration:.2f} seconds")

        exit_code = 0
        if result is None or (hasattr(result, 'wasSuccessful') and not result.wasSuccessful()):
            exit_code = 1
        sys.exit(exit_code)

    except KeyboardInterrupt:
        print("\n⚠️  Execution interrupted by user")
        sys.exit(130)
    except Exception as e:
        print(f"💥 Error during execution: {e}")
        sys.exit(1)


if __name__ == '__main__':
    main()
