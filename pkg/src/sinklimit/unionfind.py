"""Union-find over integer ids with path compression.

Used to track which collapsed chain node each original profile currently
belongs to, so roots must be controllable: ``union_into`` always keeps its
first argument as the representative.
"""


class UnionFind:
    def __init__(self, n: int):
        self._parent = list(range(n))

    def __len__(self) -> int:
        return len(self._parent)

    def find(self, i: int) -> int:
        parent = self._parent
        root = i
        while parent[root] != root:
            root = parent[root]
        # Path compression.
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    def union_into(self, root: int, other: int) -> int:
        """Merge the set containing `other` into the set rooted at `root`.

        `root` must already be a representative; it stays the representative.
        """
        r = self.find(root)
        o = self.find(other)
        if r != o:
            self._parent[o] = r
        return r

    def copy(self) -> "UnionFind":
        dup = UnionFind(0)
        dup._parent = list(self._parent)
        return dup
