import pytest

from mimosa import HostRegistry, check_program, parse_program
from mimosa.ast import UNIT_VALUE, VConst
from mimosa.sim import from_values

FIB_SOURCE = """\
step print_int (_ : int) --> ()
step add (x, y) --> z { z = x + y }
step split inp --> (o1, o2, o3) { o1, o2, o3 = inp, inp, inp }

channel a : int = { 1 }
channel b : int = { 0 }
channel c : int
channel d : int

node add implements add (a, c) --> (b) every 10ms
node split implements split (b) --> (a, d, c) every 10ms
node print implements print_int (d) --> () every 10ms
"""

EDGE_SOURCE = """\
step edge_detect (in : bool) --> (out : bool?)
{
    pre_in = in -> pre in;
    out = if !pre_in && in then (Some true)
          else if pre_in && !in then (Some false)
          else None;
}

channel a : bool
channel b : bool

node edge implements edge_detect (a) --> (b?) every 100ms
"""

# The edge detector wired into a runnable network: a pin sensor feeds it and
# a watcher drains its output channel.
EDGE_NETWORK = """\
step pin () --> (level : bool)
step watch (_ : bool) --> ()

""" + EDGE_SOURCE.replace(
    "node edge implements edge_detect (a) --> (b?) every 100ms",
    "node pin implements pin () --> (a) every 100ms\n"
    "node edge implements edge_detect (a) --> (b?) every 100ms\n"
    "node watch implements watch (b) --> () every 100ms",
)


def bools(*flags):
    return [VConst(bool(f)) for f in flags]


def silent(_value, _ctx):
    return UNIT_VALUE


def quiet_fib_hosts() -> HostRegistry:
    registry = HostRegistry()
    registry.bind_fn("print_int", silent)
    return registry


def edge_hosts(levels) -> HostRegistry:
    registry = HostRegistry()
    registry.bind("pin", from_values(levels))
    registry.bind_fn("watch", silent)
    return registry


@pytest.fixture(scope="session")
def fib_program():
    return parse_program(FIB_SOURCE, file="fib.mim")


@pytest.fixture(scope="session")
def fib_checked(fib_program):
    return check_program(fib_program)


@pytest.fixture(scope="session")
def edge_program():
    return parse_program(EDGE_SOURCE, file="edge.mim")


@pytest.fixture(scope="session")
def edge_network_checked():
    return check_program(parse_program(EDGE_NETWORK, file="edge_net.mim"))
