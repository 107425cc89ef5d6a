"""Reverse-mode automatic differentiation over a recorded tape of tensor primitives.

Every primitive accepts numpy arrays or TapeNode objects. When none of the operands is a
TapeNode the primitive is applied directly and a numpy array is returned, so model code written
against these functions runs unchanged as a plain forward pass or as a differentiable graph.

Nodes are evaluated as soon as all of their inputs are bound. Graphs built on unbound
placeholders stay unevaluated until forward_eval is called on their root.
"""
import enum
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from sciml_priors.components.numkit.linalg import invert_small_matrix
from sciml_priors.utilities.exceptions import (
    NonFiniteError,
    ShapeMismatchError,
    UnevaluatedGraphError,
)

logger = logging.getLogger(__name__)

Tensor = np.ndarray


class Primitive(enum.Enum):
    """The fixed set of operations a tape can record."""

    LEAF = "leaf"
    AFFINE = "affine"
    MATMUL = "matmul"
    TRANSPOSE = "transpose"
    MONOMIAL = "monomial"
    SIGMOID = "sigmoid"
    RELU = "relu"
    ABS = "abs"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    SUM = "sum"
    INVERSE = "inverse"
    DIAG = "diag"
    RESHAPE = "reshape"
    CONCAT = "concat"
    TAKE = "take"
    SQRT = "sqrt"


class TapeNode:
    """
    One recorded value of a computation graph.

    Attributes:
        primitive (Primitive): The operation that produced the value.
        inputs (tuple): The operand nodes.
        attrs (dict): Static arguments of the operation (axis, order, indices, ...).
        shape (tuple): Shape of the value, known at construction.
        value (np.ndarray): The evaluated value, or None while unevaluated.
        name (str): Parameter name of trainable leaves.
        trainable (bool): Whether backward_grad reports a gradient for this leaf.
    """

    __slots__ = (
        "primitive",
        "inputs",
        "attrs",
        "shape",
        "value",
        "cache",
        "name",
        "trainable",
        "requires_grad",
        "node_id",
    )
    __array_ufunc__ = None
    _counter = itertools.count()

    def __init__(
        self,
        primitive: Primitive,
        inputs: tuple = (),
        attrs: Optional[dict] = None,
        shape: tuple = (),
        value: Optional[np.ndarray] = None,
        name: Optional[str] = None,
        trainable: bool = False,
    ):
        self.primitive = primitive
        self.inputs = inputs
        self.attrs = attrs or {}
        self.shape = tuple(shape)
        self.value = value
        self.cache = None
        self.name = name
        self.trainable = trainable
        self.requires_grad = trainable or any(node.requires_grad for node in inputs)
        self.node_id = next(TapeNode._counter)

    def __repr__(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"TapeNode({self.primitive.value}{label}, shape={self.shape})"

    @property
    def T(self) -> "TapeNode":  # pylint: disable=invalid-name
        """Swaps the last two axes."""
        return transpose(self)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, TapeNode):
            raise TypeError("Division by a TapeNode is not a recorded primitive")
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)


Operand = Union[TapeNode, np.ndarray, float, int]


class GradMap(dict):
    """Mapping of parameter name to the gradient of the root with respect to that parameter."""

    def complete(self, parameters: dict) -> "GradMap":
        """Returns a copy with zero gradients for every parameter the root does not depend on."""
        return GradMap(
            (name, self[name] if name in self else np.zeros_like(array))
            for name, array in parameters.items()
        )


@dataclass(frozen=True)
class _Rule:
    shape: Callable[[list, dict], tuple]
    forward: Callable[[list, dict], tuple]
    backward: Callable[[np.ndarray, list, np.ndarray, Any, dict], list]


def _fail(primitive: Primitive, detail: str) -> None:
    raise ShapeMismatchError(f"{primitive.value}: {detail}")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sums a broadcast gradient back down to the operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _swap(array: np.ndarray) -> np.ndarray:
    return np.swapaxes(array, -1, -2)


def _normalize_axis(axis: int, ndim: int, primitive: Primitive) -> int:
    if not -ndim <= axis < ndim:
        _fail(primitive, f"axis {axis} out of range for rank {ndim}")
    return axis % ndim


def _same_shape(shapes: list, attrs: dict) -> tuple:  # pylint: disable=unused-argument
    return shapes[0]


def _broadcast_shape(primitive: Primitive) -> Callable:
    def infer(shapes: list, attrs: dict) -> tuple:  # pylint: disable=unused-argument
        try:
            return tuple(np.broadcast_shapes(*shapes))
        except ValueError:
            _fail(primitive, f"cannot broadcast operand shapes {shapes[0]} and {shapes[1]}")
        return ()

    return infer


def _affine_shape(shapes: list, attrs: dict) -> tuple:  # pylint: disable=unused-argument
    x_shape, w_shape = shapes[0], shapes[1]
    if len(w_shape) != 2:
        _fail(Primitive.AFFINE, f"weight must be a matrix, got shape {w_shape}")
    if not x_shape or x_shape[-1] != w_shape[1]:
        _fail(Primitive.AFFINE, f"input shape {x_shape} does not match weight shape {w_shape}")
    if len(shapes) == 3 and tuple(shapes[2]) != (w_shape[0],):
        _fail(Primitive.AFFINE, f"bias shape {shapes[2]} does not match weight shape {w_shape}")
    return tuple(x_shape[:-1]) + (w_shape[0],)


def _affine_forward(values: list, attrs: dict) -> tuple:  # pylint: disable=unused-argument
    out = values[0] @ values[1].T
    if len(values) == 3:
        out = out + values[2]
    return out, None


def _affine_backward(grad, values, out, cache, attrs):  # pylint: disable=unused-argument
    x, weight = values[0], values[1]
    flat_grad = grad.reshape(-1, grad.shape[-1])
    grads = [grad @ weight, flat_grad.T @ x.reshape(-1, x.shape[-1])]
    if len(values) == 3:
        grads.append(flat_grad.sum(axis=0))
    return grads


def _matmul_shape(shapes: list, attrs: dict) -> tuple:  # pylint: disable=unused-argument
    a_shape, b_shape = shapes
    if len(a_shape) < 2 or len(b_shape) < 2:
        _fail(Primitive.MATMUL, f"operands need rank >= 2, got {a_shape} and {b_shape}")
    if a_shape[-1] != b_shape[-2]:
        _fail(Primitive.MATMUL, f"inner dimensions differ: {a_shape} @ {b_shape}")
    try:
        batch = tuple(np.broadcast_shapes(a_shape[:-2], b_shape[:-2]))
    except ValueError:
        _fail(Primitive.MATMUL, f"batch axes do not broadcast: {a_shape} @ {b_shape}")
    return batch + (a_shape[-2], b_shape[-1])


def _matmul_backward(grad, values, out, cache, attrs):  # pylint: disable=unused-argument
    a, b = values
    return [
        _unbroadcast(grad @ _swap(b), a.shape),
        _unbroadcast(_swap(a) @ grad, b.shape),
    ]


def _transpose_shape(shapes: list, attrs: dict) -> tuple:  # pylint: disable=unused-argument
    shape = shapes[0]
    if len(shape) < 2:
        _fail(Primitive.TRANSPOSE, f"operand needs rank >= 2, got {shape}")
    return tuple(shape[:-2]) + (shape[-1], shape[-2])


def _monomial_forward(values: list, attrs: dict) -> tuple:
    order = attrs["order"]
    return values[0] ** order / math.factorial(order), None


def _monomial_backward(grad, values, out, cache, attrs):  # pylint: disable=unused-argument
    order = attrs["order"]
    if order == 0:
        return [np.zeros_like(values[0])]
    return [grad * values[0] ** (order - 1) / math.factorial(order - 1)]


def _sum_shape(shapes: list, attrs: dict) -> tuple:
    shape = shapes[0]
    axis = attrs["axis"]
    if axis is None:
        return tuple(1 for _ in shape) if attrs["keepdims"] else ()
    axes = {_normalize_axis(a, len(shape), Primitive.SUM) for a in axis}
    if attrs["keepdims"]:
        return tuple(1 if i in axes else size for i, size in enumerate(shape))
    return tuple(size for i, size in enumerate(shape) if i not in axes)


def _sum_backward(grad, values, out, cache, attrs):  # pylint: disable=unused-argument
    shape = values[0].shape
    if attrs["axis"] is not None and not attrs["keepdims"]:
        axes = tuple(sorted(a % len(shape) for a in attrs["axis"]))
        grad = np.expand_dims(grad, axes)
    return [np.broadcast_to(grad, shape)]


def _square_shape(shapes: list, attrs: dict) -> tuple:  # pylint: disable=unused-argument
    shape = shapes[0]
    if len(shape) < 2 or shape[-1] != shape[-2]:
        _fail(Primitive.INVERSE, f"expected square matrices, got shape {shape}")
    return shape


def _diag_shape(shapes: list, attrs: dict) -> tuple:  # pylint: disable=unused-argument
    shape = shapes[0]
    if not shape:
        _fail(Primitive.DIAG, "operand needs rank >= 1")
    return tuple(shape) + (shape[-1],)


def _reshape_shape(shapes: list, attrs: dict) -> tuple:
    shape = shapes[0]
    size = math.prod(shape)
    target = list(attrs["shape"])
    if target.count(-1) > 1:
        _fail(Primitive.RESHAPE, f"more than one free axis in {tuple(target)}")
    if -1 in target:
        known = math.prod(s for s in target if s != -1)
        if known == 0 or size % known:
            _fail(Primitive.RESHAPE, f"cannot reshape {shape} into {tuple(target)}")
        target[target.index(-1)] = size // known
    if math.prod(target) != size:
        _fail(Primitive.RESHAPE, f"cannot reshape {shape} into {tuple(target)}")
    return tuple(target)


def _concat_shape(shapes: list, attrs: dict) -> tuple:
    first = shapes[0]
    axis = _normalize_axis(attrs["axis"], len(first), Primitive.CONCAT)
    for other in shapes[1:]:
        if len(other) != len(first) or any(
            a != b for i, (a, b) in enumerate(zip(first, other)) if i != axis
        ):
            _fail(Primitive.CONCAT, f"shapes {first} and {other} differ off axis {axis}")
    return tuple(first[:axis]) + (sum(s[axis] for s in shapes),) + tuple(first[axis + 1 :])


def _concat_backward(grad, values, out, cache, attrs):  # pylint: disable=unused-argument
    axis = attrs["axis"]
    bounds = np.cumsum([v.shape[axis] for v in values])[:-1]
    return np.split(grad, bounds, axis=axis)


def _take_shape(shapes: list, attrs: dict) -> tuple:
    shape = shapes[0]
    axis = _normalize_axis(attrs["axis"], len(shape), Primitive.TAKE)
    indices = attrs["indices"]
    if indices.size and (indices.min() < -shape[axis] or indices.max() >= shape[axis]):
        _fail(Primitive.TAKE, f"index out of range for axis of size {shape[axis]}")
    return tuple(shape[:axis]) + tuple(indices.shape) + tuple(shape[axis + 1 :])


def _take_backward(grad, values, out, cache, attrs):  # pylint: disable=unused-argument
    source = values[0]
    axis = attrs["axis"] % source.ndim
    indices = attrs["indices"]
    moved_shape = (source.shape[axis],) + tuple(np.delete(source.shape, axis))
    accumulated = np.zeros(moved_shape)
    source_axes = list(range(axis, axis + indices.ndim))
    moved_grad = np.moveaxis(grad, source_axes, list(range(indices.ndim)))
    np.add.at(accumulated, indices, moved_grad)
    return [np.moveaxis(accumulated, 0, axis)]


def _sqrt_backward(grad, values, out, cache, attrs):  # pylint: disable=unused-argument
    positive = out > 0.0
    return [np.where(positive, 0.5 * grad / np.where(positive, out, 1.0), 0.0)]


def _elementwise(forward: Callable, backward: Callable) -> _Rule:
    return _Rule(
        shape=_same_shape,
        forward=lambda values, attrs: (forward(values[0], attrs), None),
        backward=backward,
    )


_RULES: dict[Primitive, _Rule] = {
    Primitive.AFFINE: _Rule(_affine_shape, _affine_forward, _affine_backward),
    Primitive.MATMUL: _Rule(
        _matmul_shape, lambda values, attrs: (values[0] @ values[1], None), _matmul_backward
    ),
    Primitive.TRANSPOSE: _Rule(
        _transpose_shape,
        lambda values, attrs: (_swap(values[0]), None),
        lambda grad, values, out, cache, attrs: [_swap(grad)],
    ),
    Primitive.MONOMIAL: _Rule(_same_shape, _monomial_forward, _monomial_backward),
    Primitive.SIGMOID: _elementwise(
        lambda x, attrs: expit(x),
        lambda grad, values, out, cache, attrs: [grad * out * (1.0 - out)],
    ),
    Primitive.RELU: _elementwise(
        lambda x, attrs: np.maximum(x, 0.0),
        lambda grad, values, out, cache, attrs: [grad * (values[0] > 0.0)],
    ),
    Primitive.ABS: _elementwise(
        lambda x, attrs: np.abs(x),
        lambda grad, values, out, cache, attrs: [grad * np.sign(values[0])],
    ),
    Primitive.SQRT: _elementwise(lambda x, attrs: np.sqrt(x), _sqrt_backward),
    Primitive.ADD: _Rule(
        _broadcast_shape(Primitive.ADD),
        lambda values, attrs: (values[0] + values[1], None),
        lambda grad, values, out, cache, attrs: [
            _unbroadcast(grad, values[0].shape),
            _unbroadcast(grad, values[1].shape),
        ],
    ),
    Primitive.SUB: _Rule(
        _broadcast_shape(Primitive.SUB),
        lambda values, attrs: (values[0] - values[1], None),
        lambda grad, values, out, cache, attrs: [
            _unbroadcast(grad, values[0].shape),
            _unbroadcast(-grad, values[1].shape),
        ],
    ),
    Primitive.MUL: _Rule(
        _broadcast_shape(Primitive.MUL),
        lambda values, attrs: (values[0] * values[1], None),
        lambda grad, values, out, cache, attrs: [
            _unbroadcast(grad * values[1], values[0].shape),
            _unbroadcast(grad * values[0], values[1].shape),
        ],
    ),
    Primitive.SUM: _Rule(
        _sum_shape,
        lambda values, attrs: (
            np.sum(values[0], axis=attrs["axis"], keepdims=attrs["keepdims"]),
            None,
        ),
        _sum_backward,
    ),
    Primitive.INVERSE: _Rule(
        _square_shape,
        lambda values, attrs: (invert_small_matrix(values[0]), None),
        lambda grad, values, out, cache, attrs: [-(_swap(out) @ grad @ _swap(out))],
    ),
    Primitive.DIAG: _Rule(
        _diag_shape,
        lambda values, attrs: (values[0][..., :, None] * np.eye(values[0].shape[-1]), None),
        lambda grad, values, out, cache, attrs: [
            np.diagonal(grad, axis1=-2, axis2=-1).copy()
        ],
    ),
    Primitive.RESHAPE: _Rule(
        _reshape_shape,
        lambda values, attrs: (values[0].reshape(attrs["shape"]), None),
        lambda grad, values, out, cache, attrs: [grad.reshape(values[0].shape)],
    ),
    Primitive.CONCAT: _Rule(
        _concat_shape,
        lambda values, attrs: (np.concatenate(values, axis=attrs["axis"]), None),
        _concat_backward,
    ),
    Primitive.TAKE: _Rule(
        _take_shape,
        lambda values, attrs: (np.take(values[0], attrs["indices"], axis=attrs["axis"]), None),
        _take_backward,
    ),
}


def _as_array(operand: Any) -> np.ndarray:
    return np.asarray(operand, dtype=np.float64)


def _check_finite(value: np.ndarray, primitive: Primitive) -> None:
    if not np.all(np.isfinite(value)):
        logger.error("Non-finite output from primitive %s", primitive.value)
        raise NonFiniteError(f"{primitive.value}: produced non-finite values")


def _evaluate(node: TapeNode) -> None:
    rule = _RULES[node.primitive]
    out, cache = rule.forward([inp.value for inp in node.inputs], node.attrs)
    out = _as_array(out)
    _check_finite(out, node.primitive)
    node.value = out
    node.cache = cache


def _apply(primitive: Primitive, operands: Sequence[Operand], **attrs) -> Union[TapeNode, Tensor]:
    rule = _RULES[primitive]
    if not any(isinstance(operand, TapeNode) for operand in operands):
        values = [_as_array(operand) for operand in operands]
        rule.shape([v.shape for v in values], attrs)
        out, _ = rule.forward(values, attrs)
        out = _as_array(out)
        _check_finite(out, primitive)
        return out

    inputs = tuple(
        operand if isinstance(operand, TapeNode) else constant(operand) for operand in operands
    )
    shape = rule.shape([inp.shape for inp in inputs], attrs)
    node = TapeNode(primitive, inputs, attrs, shape)
    if all(inp.value is not None for inp in inputs):
        _evaluate(node)
    return node


# ---- leaves


def constant(value: Any) -> TapeNode:
    """Creates a bound leaf that never receives a gradient."""
    array = _as_array(value)
    return TapeNode(Primitive.LEAF, shape=array.shape, value=array)


def variable(value: Any, name: str) -> TapeNode:
    """Creates a bound trainable leaf reported under `name` by backward_grad."""
    array = _as_array(value)
    _check_finite(array, Primitive.LEAF)
    return TapeNode(Primitive.LEAF, shape=array.shape, value=array, name=name, trainable=True)


def placeholder(shape: Sequence[int], name: Optional[str] = None, trainable: bool = False):
    """Creates an unbound leaf; graphs depending on it are evaluated by forward_eval."""
    return TapeNode(Primitive.LEAF, shape=tuple(shape), name=name, trainable=trainable)


def bind(leaf: TapeNode, value: Any) -> None:
    """
    Binds a new value to a leaf. Nodes computed from the leaf keep their old values until
    forward_eval is called again on their root.
    """
    if leaf.primitive is not Primitive.LEAF:
        raise ShapeMismatchError(f"bind: {leaf!r} is not a leaf")
    array = _as_array(value)
    if array.shape != leaf.shape:
        raise ShapeMismatchError(f"bind: value shape {array.shape} != leaf shape {leaf.shape}")
    leaf.value = array


def value_of(operand: Operand) -> Tensor:
    """Returns the current value of a node, or the operand itself as an array."""
    if isinstance(operand, TapeNode):
        if operand.value is None:
            raise UnevaluatedGraphError(f"{operand!r} has not been evaluated")
        return operand.value
    return _as_array(operand)


def shape_of(operand: Operand) -> tuple:
    """Returns the shape of a node or array without requiring a value."""
    if isinstance(operand, TapeNode):
        return operand.shape
    return np.shape(operand)


# ---- primitives


def affine(x: Operand, weight: Operand, bias: Optional[Operand] = None):
    """x @ weightᵀ + bias over the last axis of x; weight has shape (out, in)."""
    operands = (x, weight) if bias is None else (x, weight, bias)
    return _apply(Primitive.AFFINE, operands)


def matmul(a: Operand, b: Operand):
    """Batched matrix product of operands with rank >= 2."""
    return _apply(Primitive.MATMUL, (a, b))


def transpose(x: Operand):
    """Swaps the last two axes."""
    return _apply(Primitive.TRANSPOSE, (x,))


def monomial(x: Operand, order: int):
    """Elementwise x**order / order!."""
    if order < 0:
        raise ShapeMismatchError(f"monomial: order must be non-negative, got {order}")
    return _apply(Primitive.MONOMIAL, (x,), order=int(order))


def sigmoid(x: Operand):
    """Elementwise logistic function."""
    return _apply(Primitive.SIGMOID, (x,))


def relu(x: Operand):
    """Elementwise max(0, x)."""
    return _apply(Primitive.RELU, (x,))


def absolute(x: Operand):
    """Elementwise |x|; the subgradient at zero is zero."""
    return _apply(Primitive.ABS, (x,))


def sqrt(x: Operand):
    """Elementwise square root."""
    return _apply(Primitive.SQRT, (x,))


def add(a: Operand, b: Operand):
    """Elementwise sum with broadcasting."""
    return _apply(Primitive.ADD, (a, b))


def sub(a: Operand, b: Operand):
    """Elementwise difference with broadcasting."""
    return _apply(Primitive.SUB, (a, b))


def mul(a: Operand, b: Operand):
    """Elementwise product with broadcasting."""
    return _apply(Primitive.MUL, (a, b))


def reduce_sum(x: Operand, axis: Union[int, Sequence[int], None] = None, keepdims: bool = False):
    """Sums over the given axes, or over everything when axis is None."""
    if isinstance(axis, int):
        axis = (axis,)
    elif axis is not None:
        axis = tuple(axis)
    return _apply(Primitive.SUM, (x,), axis=axis, keepdims=keepdims)


def inverse(x: Operand):
    """Inverse of a square matrix or of a stack of them."""
    return _apply(Primitive.INVERSE, (x,))


def diag(x: Operand):
    """Builds diagonal matrices from the last axis."""
    return _apply(Primitive.DIAG, (x,))


def reshape(x: Operand, shape: Sequence[int]):
    """Reshapes x; one axis may be -1."""
    return _apply(Primitive.RESHAPE, (x,), shape=tuple(int(s) for s in shape))


def concat(operands: Sequence[Operand], axis: int = -1):
    """Concatenates operands along an axis."""
    if not operands:
        raise ShapeMismatchError("concat: nothing to concatenate")
    return _apply(Primitive.CONCAT, tuple(operands), axis=axis)


def take(x: Operand, indices: Any, axis: int = -1):
    """Gathers entries of x along an axis."""
    return _apply(Primitive.TAKE, (x,), indices=np.asarray(indices, dtype=np.int64), axis=axis)


# ---- graph traversal


def _topological_order(root: TapeNode) -> list[TapeNode]:
    """Inputs before consumers; every node appears once."""
    order: list[TapeNode] = []
    visited: set[int] = set()
    stack: list[tuple[TapeNode, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in visited:
            continue
        visited.add(node.node_id)
        stack.append((node, True))
        for inp in node.inputs:
            if inp.node_id not in visited:
                stack.append((inp, False))
    return order


def forward_eval(root: Operand) -> Tensor:
    """
    Evaluates every node of the graph below root from its leaves.

    Args:
        root: The graph root. Arrays are returned unchanged.

    Returns:
        The value at the root.

    Raises:
        UnevaluatedGraphError: A leaf has no bound value.
        ShapeMismatchError: Operand shapes of a primitive are incompatible.
        NonFiniteError: A primitive produced NaN or infinity.
    """
    if not isinstance(root, TapeNode):
        return _as_array(root)

    for node in _topological_order(root):
        if node.primitive is Primitive.LEAF:
            if node.value is None:
                logger.error("forward_eval reached unbound leaf %r", node)
                raise UnevaluatedGraphError(f"leaf {node!r} is not bound")
            continue
        _evaluate(node)
    return root.value


def backward_grad(root: TapeNode, seed: Optional[Any] = None) -> GradMap:
    """
    Propagates gradients of (root · seed) back to every trainable leaf.

    Args:
        root: An evaluated graph root.
        seed: Cotangent with the root's shape. Defaults to ones.

    Returns:
        GradMap from leaf name to gradient. Leaves the root does not depend on are absent.

    Raises:
        UnevaluatedGraphError: A node of the graph has not been evaluated.
        ShapeMismatchError: The seed shape differs from the root shape.
    """
    if not isinstance(root, TapeNode):
        return GradMap()

    order = _topological_order(root)
    if any(node.value is None for node in order):
        logger.error("backward_grad called on an unevaluated graph rooted at %r", root)
        raise UnevaluatedGraphError(f"graph rooted at {root!r} has not been evaluated")

    seed_array = np.ones(root.shape) if seed is None else _as_array(seed)
    if seed_array.shape != root.shape:
        raise ShapeMismatchError(
            f"backward_grad: seed shape {seed_array.shape} != root shape {root.shape}"
        )

    gradients: GradMap = GradMap()
    pending: dict[int, np.ndarray] = {root.node_id: seed_array}
    for node in reversed(order):
        grad = pending.pop(node.node_id, None)
        if grad is None or not node.requires_grad:
            continue
        if node.primitive is Primitive.LEAF:
            if node.trainable:
                previous = gradients.get(node.name)
                gradients[node.name] = grad if previous is None else previous + grad
            continue

        input_values = [inp.value for inp in node.inputs]
        input_grads = _RULES[node.primitive].backward(
            grad, input_values, node.value, node.cache, node.attrs
        )
        for inp, inp_grad in zip(node.inputs, input_grads):
            if inp_grad is None or not inp.requires_grad:
                continue
            previous = pending.get(inp.node_id)
            pending[inp.node_id] = inp_grad if previous is None else previous + inp_grad

    return GradMap((name, np.array(grad, dtype=np.float64)) for name, grad in gradients.items())
