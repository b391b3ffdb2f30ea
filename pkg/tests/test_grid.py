import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from conftest import replan_trajectory

from advplan.grid import (
    INF,
    DStarLite,
    Grid,
    IllegalWallError,
    MazeGenerationError,
    add_wall,
    astar,
    astar_cost,
    dstar_lite_plan,
    generate_maze,
    grid_heuristic,
    shortest_distance,
    walk,
)


def nx_distance(grid):
    g = nx.Graph()
    for cell in grid.cells():
        if grid.free(cell):
            g.add_node(cell)
            for nb in grid.neighbors(cell):
                g.add_edge(cell, nb)
    try:
        return nx.shortest_path_length(g, grid.start, grid.goal)
    except nx.NetworkXNoPath:
        return INF


def test_heuristic_examples():
    assert grid_heuristic("euclidean", (0, 0), (3, 4)) == 5.0
    assert grid_heuristic("manhattan", (0, 0), (3, 4)) == 7
    assert grid_heuristic("manhattan", (2, 2), (2, 2)) == 0


def test_empty_grid_walk_costs_eight():
    grid = Grid(5, 5, frozenset(), (0, 0), (4, 4))
    cells = walk(DStarLite(grid))
    assert len(cells) - 1 == 8
    assert astar_cost(grid) == 8


def test_enclosed_goal_unreachable():
    grid = Grid.from_ascii("S....\n.....\n..###\n..#G#\n..###\n")
    agent = DStarLite(grid)
    assert agent.next_cell() is None
    assert dstar_lite_plan(grid, agent.state) is None
    assert walk(DStarLite(grid)) is None
    assert shortest_distance(grid) == INF


def test_ascii_round_trip():
    text = "S.#\n##.\nG..\n"
    grid = Grid.from_ascii(text)
    assert grid.start == (0, 0) and grid.goal == (2, 0)
    assert grid.to_ascii() == text
    assert Grid.from_ascii(grid.to_ascii()) == grid


@pytest.mark.parametrize("bad", ["S.\nG\n", "..\n.G\n", "SS\nG.\n", "S?\nG.\n"])
def test_ascii_rejects_malformed(bad):
    with pytest.raises(ValueError):
        Grid.from_ascii(bad)


def test_illegal_walls():
    grid = Grid(4, 4, frozenset({(1, 1)}), (0, 0), (3, 3))
    agent = DStarLite(grid)
    for cell in [(0, 0), (3, 3), (1, 1), (4, 0), (-1, 2)]:
        with pytest.raises(IllegalWallError):
            agent.add_wall(cell)
    agent.move_to(agent.next_cell())
    with pytest.raises(IllegalWallError):
        agent.add_wall(agent.position)


def test_add_wall_function_matches_method():
    grid = Grid(5, 5, frozenset(), (0, 0), (4, 4))
    agent = DStarLite(grid)
    state = add_wall(grid, agent.state, (1, 0))
    assert (1, 0) in state.grid.walls
    assert DStarLite.from_state(state).cost_to_goal() == 8


def test_maze_determinism_and_validity():
    a = generate_maze(15, 15, 0.25, 3)
    assert a == generate_maze(15, 15, 0.25, 3)
    assert shortest_distance(a) < INF
    assert a.start not in a.walls and a.goal not in a.walls


def test_zero_frequency_is_empty():
    for seed in range(5):
        grid = generate_maze(6, 4, 0.0, seed, placement="random")
        assert not grid.walls and shortest_distance(grid) < INF


@pytest.mark.parametrize("placement", ["corners", "random"])
def test_wall_count_mean(placement):
    # solvability filtering removes some dense mazes, so the mean sits a bit
    # below 0.25 * 223 but well within 10%
    counts = [len(generate_maze(15, 15, 0.25, seed, placement=placement).walls) for seed in range(1000)]
    mean = sum(counts) / len(counts)
    assert abs(mean - 0.25 * 223) <= 0.1 * 0.25 * 223


def test_give_up_rate():
    failures = 0
    for seed in range(2000):
        try:
            generate_maze(3, 1, 0.99, seed, max_attempts=10)
        except MazeGenerationError as err:
            assert err.attempts == 10
            failures += 1
    expected = 0.99 ** 10
    assert abs(failures / 2000 - expected) < 0.05


def test_bad_generator_arguments():
    with pytest.raises(ValueError):
        generate_maze(5, 5, 1.0, 0)
    with pytest.raises(ValueError):
        generate_maze(5, 5, 0.2, 0, placement="edges")


def test_astar_matches_networkx():
    for seed in range(150):
        grid = generate_maze(9, 7, 0.3, seed, placement="random")
        path = astar(grid)
        assert len(path) - 1 == nx_distance(grid) == shortest_distance(grid)


def test_manhattan_admissible_exhaustively():
    for seed in range(30):
        grid = generate_maze(8, 8, 0.3, seed, placement="random")
        for cell in grid.cells():
            if grid.free(cell):
                true = shortest_distance(grid, cell, grid.goal)
                assert grid_heuristic("manhattan", cell, grid.goal) <= true
                assert grid_heuristic("euclidean", cell, grid.goal) <= true


def test_dstar_matches_astar_on_trajectories():
    for seed in range(60):
        pairs, walked = replan_trajectory(seed)
        assert walked
        for dstar, fresh in pairs:
            assert dstar == fresh


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), max_size=12))
def test_walls_only_increase_cost(seed, extra):
    grid = generate_maze(7, 7, 0.2, seed, placement="random")
    cost = shortest_distance(grid)
    for cell in extra:
        if cell in (grid.start, grid.goal):
            continue
        grid = grid.with_wall(cell)
        nxt = shortest_distance(grid)
        assert nxt >= cost
        cost = nxt


def test_next_cell_tie_break_is_row_major():
    grid = Grid(3, 3, frozenset(), (2, 2), (0, 0))
    assert DStarLite(grid).next_cell() == (1, 2)
