import sys

from work_fluctuations.cli import main as cli_main


def main() -> None:
    # Full simulate -> invert -> workdist -> crooks -> report chain for one config
    config_name = sys.argv[1] if len(sys.argv) > 1 else "default.yaml"
    sys.exit(cli_main(["run", "--config", config_name]))


if __name__ == "__main__":
    main()
