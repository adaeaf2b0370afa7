"""
DOT 輸出 (只產生原始碼，不需要安裝 graphviz 執行檔)：
1. 單一圖 / 有根圖，根節點上色。
2. spasm 成員各自成一個 cluster，標上係數。
3. pattern tree：骨幹的邊深色，接上去的圖樣邊淺色。
"""
from graphviz import Graph as DotGraph

from graph_core import RootedGraph

NODE_ATTR = {'shape': 'circle', 'style': 'filled', 'fontsize': '9', 'fontname': 'Sans-Serif', 'width': '0.3'}
EDGE_ATTR = {'penwidth': '1.2'}

ROOT_BG = "#E74C3C"
NODE_BG = "#EBF5FB"
BACKBONE_EDGE = "#2C3E50"
PATTERN_EDGE = "#AAB7B8"


def _draw(dot, g, root=None, prefix="", backbone=None):
    for v in range(g.n):
        is_root = v == root
        dot.node(
            f"{prefix}{v}", str(v),
            fillcolor=ROOT_BG if is_root else NODE_BG,
            fontcolor="#FFFFFF" if is_root else "#566573",
            **NODE_ATTR,
        )
    for u, v in g.edge_list():
        on_backbone = backbone is None or (u, v) in backbone
        dot.edge(f"{prefix}{u}", f"{prefix}{v}", color=BACKBONE_EDGE if on_backbone else PATTERN_EDGE, **EDGE_ATTR)


def graph_to_dot(g, name=None):
    """Graph 或 RootedGraph 皆可。"""
    root = None
    if isinstance(g, RootedGraph):
        g, root = g.graph, g.root
    dot = DotGraph(name or g.label())
    dot.attr(layout='neato', margin='0.05', bgcolor='transparent')
    _draw(dot, g, root)
    return dot.source


def spasm_to_dot(sp):
    dot = DotGraph(f"spasm_{sp.pattern.label()}")
    dot.attr(margin='0.05', bgcolor='transparent')
    for i, member in enumerate(sp):
        with dot.subgraph(name=f"cluster_{i}") as sub:
            sub.attr(label=f"{member.graph.label()}  coeff={member.coefficient}", fontsize='9')
            _draw(sub, member.graph, prefix=f"m{i}_")
    return dot.source


def tree_to_dot(pt, name=None):
    backbone = set(pt.backbone.graph.edges)
    dot = DotGraph(name or "pattern_tree")
    dot.attr(margin='0.05', bgcolor='transparent')
    _draw(dot, pt.tree.graph, pt.tree.root, backbone=backbone)
    return dot.source


def trees_to_dot(trees):
    dot = DotGraph("pattern_trees")
    dot.attr(margin='0.05', bgcolor='transparent')
    for i, pt in enumerate(trees):
        with dot.subgraph(name=f"cluster_{i}") as sub:
            sub.attr(label=f"#{i} n={pt.tree.n}", fontsize='9')
            _draw(sub, pt.tree.graph, pt.tree.root, prefix=f"t{i}_", backbone=set(pt.backbone.graph.edges))
    return dot.source
