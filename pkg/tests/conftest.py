from pathlib import Path
import sys

# apps/main.py と同じく src/ を import パスに入れる
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
