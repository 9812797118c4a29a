import os
import sys
import argparse
import logging
import warnings
from typing import List, Optional

from dotenv import load_dotenv

from src.constants import EXPORT_FORMATS, get_error_emoji, get_exit_code
from src.pipelines import (
    create_export_pipeline,
    create_forward_pipeline,
    create_measures_pipeline,
    create_solve_pipeline,
    create_verify_pipeline,
)

LOG_LEVEL_ENV = "CAPCMK_LOG_LEVEL"


def _global_options() -> argparse.ArgumentParser:
    """Flags accepted both before and after the subcommand."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        '--config', '-c',
        default=argparse.SUPPRESS,
        help='Run configuration (TOML); solution directories carry their own copy'
    )
    parent.add_argument(
        '--out', '-o',
        default=argparse.SUPPRESS,
        help='Output directory for the artifacts of this command'
    )
    parent.add_argument(
        '--verbose', '-v',
        action='store_true',
        default=argparse.SUPPRESS,
        help='Enable verbose output with solver progress'
    )
    parent.add_argument(
        '--quiet', '-q',
        action='store_true',
        default=argparse.SUPPRESS,
        help='Minimize output (errors only)'
    )
    return parent


def build_parser() -> argparse.ArgumentParser:
    parent = _global_options()
    parser = argparse.ArgumentParser(
        prog='capcmk',
        description="Capillary Christoffel-Minkowski solver and verification toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[parent],
        epilog="""
Examples:
  %(prog)s solve --config configs/exact_cap.toml          Solve and write h.csv, report.json, body.obj
  %(prog)s forward out/h.csv --k 1                        Evaluate sigma_k(W(h)) into f.csv and W_diag.csv
  %(prog)s verify out                                     Audit a solution, write verify.json
  %(prog)s measures out --k 0 1 2 --mask half.txt         Capillary area measures over a node mask
  %(prog)s export out --format csv                        Per-vertex CSV of the reconstructed body

Exit codes:
  0 success, 1 verification failed, 2 converged with warnings,
  3 solver failure, 4 invalid data or arguments

Environment:
  CAPCMK_THREADS     caps the assembly worker count
  CAPCMK_LOG_LEVEL   default log level when neither --verbose nor --quiet is given
        """
    )
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    solve = commands.add_parser('solve', parents=[parent], help='Solve the sigma_k problem for a configuration')
    solve.add_argument('config_file', nargs='?', help='Run configuration (alternative to --config)')

    forward = commands.add_parser('forward', parents=[parent], help='Evaluate sigma_k(W(h)) for a field file')
    forward.add_argument('h', help='Field CSV holding h')
    forward.add_argument('--k', type=int, help='Order k (defaults to the configuration)')

    verify = commands.add_parser('verify', parents=[parent], help='Run the verification suite on a solution')
    verify.add_argument('directory', help='Solution directory')

    measures = commands.add_parser('measures', parents=[parent], help='Capillary area measures of a solution')
    measures.add_argument('directory', help='Solution directory')
    measures.add_argument('--k', type=int, nargs='+', dest='ks', help='Orders to evaluate (default 0..n)')
    measures.add_argument('--mask', help='File of node indices restricting the measures')

    export = commands.add_parser('export', parents=[parent], help='Export a solved body')
    export.add_argument('directory', help='Solution directory')
    export.add_argument('--format', '-f', dest='fmt', default='obj',
                        help=f"Export format ({', '.join(EXPORT_FORMATS)})")
    return parser


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    args = build_parser().parse_args(argv)
    for name in ('config', 'out'):
        if not hasattr(args, name):
            setattr(args, name, None)
    for name in ('verbose', 'quiet'):
        if not hasattr(args, name):
            setattr(args, name, False)
    return args


def configure_logging(verbose: bool, quiet: bool) -> None:
    """Configure logging levels and output suppression based on verbosity."""
    if verbose:
        logging.basicConfig(level=logging.INFO)
    elif quiet:
        logging.basicConfig(level=logging.ERROR)
        warnings.filterwarnings('ignore')
    else:
        level = os.getenv(LOG_LEVEL_ENV, 'WARNING').upper()
        logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def create_pipeline(args: argparse.Namespace):
    """Map parsed arguments to the pipeline of the subcommand."""
    if args.command == 'solve':
        config = args.config_file or args.config
        if not config:
            return None
        return create_solve_pipeline(config, out_dir=args.out, verbose=args.verbose)
    if args.command == 'forward':
        return create_forward_pipeline(args.h, k=args.k, config_path=args.config,
                                       out_dir=args.out, verbose=args.verbose)
    if args.command == 'verify':
        return create_verify_pipeline(args.directory, config_path=args.config,
                                      out_dir=args.out, verbose=args.verbose)
    if args.command == 'measures':
        return create_measures_pipeline(args.directory, ks=args.ks, mask_path=args.mask,
                                        config_path=args.config, out_dir=args.out, verbose=args.verbose)
    return create_export_pipeline(args.directory, fmt=args.fmt, config_path=args.config,
                                  out_dir=args.out, verbose=args.verbose)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the capcmk command line."""

    try:
        args = parse_arguments(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which is reserved for warnings here
        return 0 if exc.code == 0 else get_exit_code('invalid-data')

    # Load environment variables before logging reads CAPCMK_LOG_LEVEL
    load_dotenv()
    configure_logging(args.verbose, args.quiet)

    if not args.quiet:
        print("🧮 capcmk - Capillary Christoffel-Minkowski Solver")
        print("=" * 60)

    pipeline = create_pipeline(args)
    if pipeline is None:
        print("❌ solve needs a run configuration: capcmk solve --config <file.toml>")
        return get_exit_code('invalid-data')

    if not args.quiet:
        print(f"🚀 Running {args.command}...")

    try:
        outcome = pipeline.kickoff()
    except KeyboardInterrupt:
        print("\n❌ Process interrupted by user")
        return 130

    if outcome.exit_code == get_exit_code('success'):
        if not args.quiet:
            print(f"✅ {outcome.message}")
    elif outcome.exit_code == get_exit_code('warnings'):
        if not args.quiet:
            print(f"⚠️  {outcome.message}")
            for warning in outcome.warnings:
                print(f"   • {warning}")
    else:
        emoji = get_error_emoji(outcome.error_kind) if outcome.error_kind else "❌"
        print(f"{emoji} {args.command} failed: {outcome.message}")
        if not args.verbose:
            print("\n🔍 Run with --verbose for solver progress and full details")

    if args.verbose and not args.quiet and outcome.artifacts:
        print("\n📁 Artifacts:")
        for path in outcome.artifacts:
            print(f"   • {path}")

    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
