from pathlib import Path
import sys

sys.path.append(str(Path(__file__).resolve().parents[1] / "src"))

from dotenv import load_dotenv

from udn_se_economics.cli import main as cli_main


def main() -> int:
    # UDN_OUTPUT_DIR などを .env から
    load_dotenv()
    return cli_main(sys.argv[1:], setup_logging=True)


if __name__ == "__main__":
    raise SystemExit(main())
