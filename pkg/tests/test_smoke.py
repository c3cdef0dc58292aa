"""
最低限のスモークテスト。
import できることと、公開 API が揃っていることだけを確認する。
"""


def test_import():
    import udn_se_economics.core as core

    for name in core.__all__:
        assert hasattr(core, name), name


def test_entry_point_parser():
    from udn_se_economics.cli import build_parser

    args = build_parser().parse_args(["figures", "fig1"])
    assert args.command == "figures"
    assert args.ids == ["fig1"]
