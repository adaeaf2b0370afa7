"""
homscope 命令列：
1. 每個子命令只負責讀參數、呼叫函式庫、把結果以 JSON (或文字) 印到 stdout。
2. 人看的表格與進度條在 --verbose 時輸出到 stderr。
3. 例外統一轉成結束碼：解析 3、不變量 4、資源上限 5、--strict 退化類別 6、計數錯誤 7。
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from bounds import BoundParams, graph_bound, monte_carlo_expectation_bound, node_bound
from divergence import shearer_coefficient
from errors import HomscopeError, InvalidArgumentError
from fwl_refinement import dataset_featurize
from graph_core import RootedGraph, load_dataset, load_pattern, parse_pattern_list, random_split, save_dataset_json
from hom_engine import count_aut, count_hom, count_hom_rooted, count_inj, count_inj_rooted, count_sub, count_sub_rooted, count_surj, spasm
from hom_matrix import build_hom_matrix, find_redundant_patterns, matrix_report_text, read_literal_csv
from pattern_trees import enumerate_pattern_trees, trees_to_json
from render import spasm_to_dot, trees_to_dot
from settings import Settings, get_settings, load_settings, read_toml, set_settings

logger = logging.getLogger("homscope")

SETTING_KEYS = {f for f in Settings.__dataclass_fields__}


# ==========================================
# 0. 共用工具
# ==========================================
def _emit(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")


def _write_text(path, text):
    Path(path).write_text(text, encoding="utf-8")
    logger.info("💾 已寫入 %s", path)


def _setup_logging(verbose):
    root = logging.getLogger()
    root.setLevel(logging.INFO if verbose else logging.WARNING)
    if not any(getattr(h, "_homscope", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        handler._homscope = True
        root.addHandler(handler)


def _show_table(df):
    if logger.isEnabledFor(logging.INFO):
        sys.stderr.write(df.to_string() + "\n")


# ==========================================
# 1. 子命令
# ==========================================
def cmd_hom(args):
    f = load_pattern(args.pattern)
    if args.mode == "aut":
        return str(count_aut(f))
    if not args.host:
        raise InvalidArgumentError("❌ 需要 --host")
    g = load_pattern(args.host)

    if args.pattern_root is not None or args.host_root is not None:
        rf = RootedGraph(f, args.pattern_root or 0)
        rg = RootedGraph(g, args.host_root or 0)
        rooted = {"hom": count_hom_rooted, "inj": count_inj_rooted, "sub": count_sub_rooted}
        if args.mode not in rooted:
            raise InvalidArgumentError(f"❌ 有根計數不支援 --mode {args.mode}")
        return str(rooted[args.mode](rf, rg))

    fn = {"hom": count_hom, "inj": count_inj, "surj": count_surj, "sub": count_sub}[args.mode]
    return str(fn(f, g))


def cmd_spasm(args):
    sp = spasm(load_pattern(args.pattern))
    if args.dot:
        _write_text(args.dot, spasm_to_dot(sp))
    return sp.to_json()


def cmd_matrix(args):
    if args.literal:
        matrix = read_literal_csv(args.literal)
    elif args.patterns:
        matrix = build_hom_matrix(parse_pattern_list(args.patterns))
    else:
        raise InvalidArgumentError("❌ 需要 --patterns 或 --literal 其中之一")
    report = find_redundant_patterns(matrix)
    if logger.isEnabledFor(logging.INFO):
        sys.stderr.write(matrix_report_text(matrix, report))
    if args.csv:
        _write_text(args.csv, matrix.to_csv())
    out = report.to_json()
    out["matrix"] = [list(r) for r in matrix.entries]
    return out


def _dataset(args, level):
    ds = load_dataset(args.dataset, name=args.name, task=level)
    if args.train_fraction is not None:
        ds = random_split(ds, args.train_fraction, seed=args.seed, level=level)
    return ds


def _patterns(args):
    return parse_pattern_list(args.patterns) if args.patterns else None


def cmd_featurize(args):
    ds = _dataset(args, args.level)
    features = dataset_featurize(
        ds, _patterns(args), args.depth, args.level, ego=args.ego,
        rooted=not args.unrooted, counting=args.counting, progress=args.verbose,
    )
    train = set(ds.train_indices(args.level)) if ds.train is not None else None

    if args.format == "json":
        data = features.to_sparse_json()
        if train is not None:
            data["train"] = sorted(train)
        text = json.dumps(data, sort_keys=True) + "\n"
    else:
        df = features.to_frame()
        if train is not None:
            df.insert(0, "split", ["train" if i in train else "test" for i in range(len(df))])
        _show_table(df)
        text = df.to_csv(index=False)

    if args.output:
        _write_text(args.output, text)
        return None
    sys.stdout.write(text)
    return None


def cmd_bound(args):
    level = "graph" if args.task == "graph" else "node"
    ds = _dataset(args, level)
    params = BoundParams(
        lip_over_gamma=args.lip_over_gamma,
        delta=args.delta if args.delta is not None else get_settings().delta,
        n_pairs=args.n_pairs,
        knn_k=args.knn_k if args.knn_k is not None else get_settings().knn_k,
        depth=args.depth,
        seed=args.seed,
        kl_method=args.kl_method,
        ego=args.ego,
        rooted=not args.unrooted,
        counting=args.counting,
        strict=args.strict,
    )
    patterns = _patterns(args)
    if args.repeats is not None:
        report = monte_carlo_expectation_bound(ds, patterns, params, args.repeats, task=args.task)
    elif args.task == "graph":
        report = graph_bound(ds, patterns, params)
    else:
        report = node_bound(ds, patterns, params)

    row = report.to_summary_row(ds.name or str(args.dataset), args.patterns or "vertex")
    _show_table(pd.DataFrame([row]))
    if args.summary_csv:
        path = Path(args.summary_csv)
        pd.DataFrame([row]).to_csv(path, mode="a", header=not path.exists(), index=False)
    return report.to_json()


def cmd_shearer(args):
    return str(shearer_coefficient(load_pattern(args.pattern)))


def cmd_trees(args):
    patterns = _patterns(args)
    trees = enumerate_pattern_trees(patterns, args.depth, args.max_nodes)
    if args.dot:
        _write_text(args.dot, trees_to_dot(trees))
    names = patterns.names if patterns else None
    return trees_to_json(trees, names)


def cmd_convert(args):
    ds = load_dataset(args.dataset, name=args.name, task=args.task)
    save_dataset_json(ds, args.output)
    return {"graphs": len(ds.graphs), "num_classes": ds.num_classes, "output": str(args.output)}


# ==========================================
# 2. 參數定義
# ==========================================
def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"必須 >= 1: {text}")
    return value


def _fraction(text):
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"必須在 (0, 1]: {text}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="在 stderr 顯示 INFO 訊息、表格與進度條")
    common.add_argument("--config", help="TOML 設定檔 (鍵名同長參數名)")

    dataset = argparse.ArgumentParser(add_help=False)
    dataset.add_argument("--dataset", required=True, help="TU 目錄或 JSON 檔")
    dataset.add_argument("--name", help="TU 資料集名稱 (預設自動偵測)")
    dataset.add_argument("--patterns", help="逗號分隔的圖樣代號或邊列表檔 (預設: vertex)")
    dataset.add_argument("--depth", type=int, default=1)
    dataset.add_argument("--ego", action="store_true", help="節點層級改用 L 跳 ego 圖")
    dataset.add_argument("--unrooted", action="store_true", help="初始顏色對所有根加總")
    dataset.add_argument("--counting", choices=["hom", "sub"], default="hom")
    dataset.add_argument("--train-fraction", type=_fraction)
    dataset.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="homscope", description="精確同態計數與泛化界計算")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hom", parents=[common], help="計數 hom / inj / surj / aut / sub")
    p.add_argument("--pattern", required=True)
    p.add_argument("--host")
    p.add_argument("--mode", choices=["hom", "inj", "surj", "aut", "sub"], default="hom")
    p.add_argument("--pattern-root", type=int)
    p.add_argument("--host-root", type=int)
    p.set_defaults(func=cmd_hom)

    p = sub.add_parser("spasm", parents=[common], help="列出 spasm 與係數")
    p.add_argument("--pattern", required=True)
    p.add_argument("--dot", help="另存 DOT 檔")
    p.set_defaults(func=cmd_spasm)

    p = sub.add_parser("matrix", parents=[common], help="hom 矩陣、秩與多餘圖樣")
    p.add_argument("--patterns")
    p.add_argument("--literal", help="字面矩陣 CSV (第一列為名稱)")
    p.add_argument("--csv", help="另存矩陣 CSV")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("featurize", parents=[common, dataset], help="F-WL 特徵矩陣")
    p.add_argument("--level", choices=["graph", "node"], default="graph")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--output")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("bound", parents=[common, dataset], help="資料相依泛化界")
    p.add_argument("--task", choices=["graph", "node"], default="graph")
    p.add_argument("--n-pairs", type=_positive_int, default=1)
    p.add_argument("--delta", type=float)
    p.add_argument("--lip-over-gamma", type=float)
    p.add_argument("--knn-k", type=_positive_int)
    p.add_argument("--kl-method", choices=["knn", "exact"], default="knn")
    p.add_argument("--repeats", type=_positive_int)
    p.add_argument("--strict", action="store_true", help="退化類別視為錯誤")
    p.add_argument("--summary-csv", help="附加一列摘要到 CSV")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("shearer", parents=[common], help="Shearer 係數")
    p.add_argument("--pattern", required=True)
    p.set_defaults(func=cmd_shearer)

    p = sub.add_parser("trees", parents=[common], help="列舉 F-pattern tree")
    p.add_argument("--patterns")
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--max-nodes", type=_positive_int)
    p.add_argument("--dot", help="另存 DOT 檔")
    p.set_defaults(func=cmd_trees)

    p = sub.add_parser("convert", parents=[common], help="TU 目錄轉成 JSON 交換格式")
    p.add_argument("--dataset", required=True)
    p.add_argument("--name")
    p.add_argument("--task", choices=["graph", "node"], default="graph")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_convert)

    parser.subcommands = sub.choices
    return parser


def _config_value(command, action, value):
    """設定檔的值走與命令列相同的 type / choices 檢查。"""
    where = f"設定檔 {command}.{action.dest} = {value!r}"
    if action.nargs == 0:
        if not isinstance(value, bool):
            raise InvalidArgumentError(f"❌ {where} 應為 true / false")
        return value
    if isinstance(value, (bool, list, dict)):
        raise InvalidArgumentError(f"❌ {where} 型別不合法")
    try:
        converted = action.type(str(value)) if action.type else str(value)
    except (argparse.ArgumentTypeError, ValueError, TypeError) as e:
        raise InvalidArgumentError(f"❌ {where} 不合法: {e}")
    if action.choices is not None and converted not in action.choices:
        raise InvalidArgumentError(f"❌ {where} 只能是 {', '.join(map(str, action.choices))}")
    return converted


def _apply_config(parser, args, argv):
    """設定檔的值只當預設值，命令列明確給的參數優先。"""
    if not args.config:
        return args, {}
    values = read_toml(args.config)
    sub = parser.subcommands[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "func", "config")}
    overrides = {}
    defaults = {}
    for key, value in values.items():
        if key in SETTING_KEYS:
            overrides[key] = value
        elif key in actions:
            defaults[key] = _config_value(args.command, actions[key], value)
        else:
            raise InvalidArgumentError(f"❌ 設定檔含 {args.command} 不認得的鍵: {key}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv), overrides


# ==========================================
# 3. 進入點
# ==========================================
def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)

    try:
        args, overrides = _apply_config(parser, args, argv)
        set_settings(load_settings().override(**overrides))
        result = args.func(args)
    except HomscopeError as e:
        print(str(e), file=sys.stderr)
        return e.exit_code

    if isinstance(result, str):
        sys.stdout.write(result + "\n")
    elif result is not None:
        _emit(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
