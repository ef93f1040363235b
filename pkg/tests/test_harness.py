import random

import pytest

from conftest import canonical_tree_dump, distinct_pages

from chainforge.harness import (
    ChainShape,
    CostModel,
    P100_COST_MODEL,
    VerificationFailed,
    adaptive_repeat,
    chain_shape,
    estimate_instructions,
    execute_case,
    kernel_scale,
    run_case,
    simulate_times,
    sweep,
    transfer_to_device,
    verify_tree,
)
from chainforge.memory import Machine, TransferEntry
from chainforge.scenarios import (
    DenseSpec,
    LinearSpec,
    build_tree,
    marshal_tree,
)


def test_pointerchain_llinit_moves_exactly_the_targeted_array():
    metrics = run_case(LinearSpec(5, 1000, "LLinit_LLused"), "pointerchain")
    assert metrics.bytes_h2d == 8000
    assert metrics.bytes_d2h == 8000
    assert metrics.transfer_ops == 2
    assert metrics.attach_ops == 0
    assert metrics.verified


def test_marshalling_single_bulk_op_and_attach_count():
    metrics = run_case(LinearSpec(2, 100, "allinit_allused"), "marshalling")
    assert metrics.bytes_h2d == 1648
    assert metrics.attach_ops == 3
    assert metrics.verified


def test_dense_marshalling_bulk_bytes():
    metrics = run_case(DenseSpec(2, 10, 3), "marshalling")
    assert metrics.bytes_h2d == 1464
    assert metrics.verified


def test_kernel_elements_all_levels_used():
    machine = Machine()
    handle = build_tree(machine, LinearSpec(3, 4, "allinit_allused"))
    prep = transfer_to_device(machine, handle, "naive")
    stats = kernel_scale(machine, handle, prep, 2.0)
    assert stats.elements_touched == 12
    assert stats.chain_derefs == 2 * 3 - 1


def test_kernel_elements_dense_single_array():
    machine = Machine()
    handle = build_tree(machine, DenseSpec(3, 5, 3))
    prep = transfer_to_device(machine, handle, "naive")
    stats = kernel_scale(machine, handle, prep, 2.0)
    assert stats.elements_touched == 5
    assert stats.chain_derefs == 3 + 1


def test_identity_scale_leaves_tree_bytes_unchanged():
    machine = Machine()
    handle = build_tree(machine, LinearSpec(2, 16, "allinit_allused"), seed=5)
    before = [machine.host.read_bytes(a, s) for a, s in handle.allocations]
    prep = transfer_to_device(machine, handle, "naive")
    kernel_scale(machine, handle, prep, 1.0)
    from chainforge.harness import copy_back
    copy_back(machine, handle, prep)
    after = [machine.host.read_bytes(a, s) for a, s in handle.allocations]
    assert after == before


def test_instruction_estimates_match_reference_counts():
    for k in range(2, 11):
        spec = LinearSpec(k, 0, "allinit_LLused")
        for scheme in ("uvm", "marshalling"):
            assert estimate_instructions(chain_shape(spec, scheme)) == 60 + 2 * (k - 1)
        assert estimate_instructions(chain_shape(spec, "pointerchain")) == 60
    dense = DenseSpec(2, 0, 3)
    assert estimate_instructions(chain_shape(dense, "uvm")) == 80
    assert estimate_instructions(chain_shape(dense, "marshalling")) == 80
    assert estimate_instructions(chain_shape(dense, "pointerchain")) == 60


def test_instruction_estimate_step_costs():
    assert estimate_instructions(ChainShape()) == 60
    assert estimate_instructions(ChainShape(("plain",) * 9)) == 78
    assert estimate_instructions(ChainShape(("indexed",) * 3, True)) == 80


def test_simulate_times_zero_work_is_zero():
    assert simulate_times([], 0, 0, CostModel(), 0) == (0.0, 0.0)


def test_simulate_times_bandwidth_unit_consistency():
    # one bulk op of exactly bandwidth * 1 s bytes, negligible latency
    cm = CostModel(latency_us_per_op=1e-9)
    entry = TransferEntry("H2D", "bulk", int(cm.bandwidth_gib_s * (1 << 30)), 0)
    kernel, wall = simulate_times([entry], 0, 0, cm, 0)
    assert kernel == 0.0
    assert wall == pytest.approx(1e6, rel=1e-9)


def test_simulate_times_strict_subset_is_strictly_faster():
    cm = CostModel()
    a = [TransferEntry("H2D", "bulk", 8000, 0)]
    b = a + [TransferEntry("H2D", "bulk", 848, 1)]
    _, wall_a = simulate_times(a, 100, 0, cm, 8000)
    _, wall_b = simulate_times(b, 100, 0, cm, 8848)
    assert wall_a < wall_b


def test_cache_spill_penalty_applies_above_l2():
    cm = CostModel()
    kernel_small, _ = simulate_times([], 1000, 0, cm, cm.l2_bytes)
    kernel_big, _ = simulate_times([], 1000, 0, cm, cm.l2_bytes + 1)
    assert kernel_big == pytest.approx(kernel_small * cm.spill_penalty)


def test_adaptive_repeat_deterministic_converges_at_min_iters():
    result = adaptive_repeat(lambda: 41.5, min_iters=3, cv_threshold=0.02)
    assert result.iterations == 3
    assert result.mean == 41.5
    assert result.converged


def test_adaptive_repeat_jittery_closure_needs_more_iterations():
    rng = random.Random(7)
    result = adaptive_repeat(lambda: 100.0 * rng.uniform(0.9, 1.1),
                             min_iters=3, cv_threshold=0.02, max_iters=25)
    assert result.iterations > 3


def test_adaptive_repeat_flags_non_convergence_at_cap():
    values = iter([1.0, 100.0] * 50)
    result = adaptive_repeat(lambda: next(values), min_iters=3,
                             cv_threshold=0.001, max_iters=10)
    assert result.iterations == 10
    assert not result.converged


def test_run_case_reports_min_iters_for_deterministic_sim():
    metrics = run_case(LinearSpec(2, 10, "allinit_allused"), "marshalling",
                       min_iters=3)
    assert metrics.iterations == 3
    assert metrics.sim_wall_us >= metrics.sim_kernel_us


def test_verification_catches_a_corrupted_element():
    machine = Machine()
    handle = build_tree(machine, LinearSpec(2, 8, "allinit_allused"), seed=3)
    prep = transfer_to_device(machine, handle, "naive")
    kernel_scale(machine, handle, prep, 2.0)
    from chainforge.harness import copy_back
    copy_back(machine, handle, prep)
    verify_tree(machine, handle, 2.0)  # sanity: passes before corruption
    machine.host.write_f64(handle.arrays[0].addr, -1.0)
    with pytest.raises(VerificationFailed):
        verify_tree(machine, handle, 2.0)


def test_verification_catches_a_scaled_untargeted_array():
    machine = Machine()
    handle = build_tree(machine, LinearSpec(3, 8, "allinit_LLused"), seed=3)
    prep = transfer_to_device(machine, handle, "naive")
    kernel_scale(machine, handle, prep, 2.0)
    from chainforge.harness import copy_back
    copy_back(machine, handle, prep)
    untargeted = handle.arrays[0]
    data = machine.host.read_bytes(untargeted.addr, 8)
    import struct
    machine.host.write_f64(untargeted.addr, struct.unpack("<d", data)[0] * 2.0)
    with pytest.raises(VerificationFailed):
        verify_tree(machine, handle, 2.0)


def test_uvm_cold_faults_equal_distinct_pages_and_second_pass_is_free():
    cm = CostModel()
    for k, n, layout in ((2, 100, "allinit_allused"), (5, 997, "LLinit_LLused"),
                         (3, 512, "allinit_LLused")):
        machine = Machine(page_size=cm.page_size)
        machine.enable_uvm(cm.page_size)
        handle = build_tree(machine, LinearSpec(k, n, layout))
        prep = transfer_to_device(machine, handle, "uvm")

        mark = machine.log.mark()
        kernel_scale(machine, handle, prep, 2.0)
        faults = machine.log.count("page_migration", mark)

        # oracle: distinct pages under the spans the kernel touches
        spans = [(node, 24) for node in handle.node_addrs]
        from chainforge.scenarios import targeted_arrays
        spans += [(a.addr, a.count * 8) for a in targeted_arrays(handle)]
        if layout == "LLinit_LLused":
            spans = [(n_, 24) for n_ in handle.node_addrs] + \
                [(a.addr, a.count * 8) for a in targeted_arrays(handle)]
        assert faults == len(distinct_pages(spans, cm.page_size))

        mark = machine.log.mark()
        kernel_scale(machine, handle, prep, 1.0)
        assert machine.log.count("page_migration", mark) == 0


def test_naive_and_marshalled_trees_agree_after_copy_back():
    from chainforge.harness import copy_back

    spec = LinearSpec(3, 40, "allinit_allused")

    m1 = Machine()
    arena, h1 = marshal_tree(m1, spec, seed=9)
    prep1 = transfer_to_device(m1, h1, "marshalling", arena)
    kernel_scale(m1, h1, prep1, 2.0)
    copy_back(m1, h1, prep1)

    m2 = Machine()
    h2 = build_tree(m2, spec, seed=9)
    prep2 = transfer_to_device(m2, h2, "naive")
    kernel_scale(m2, h2, prep2, 2.0)
    copy_back(m2, h2, prep2)

    assert canonical_tree_dump(m1.host, h1) == canonical_tree_dump(m2.host, h2)


@pytest.mark.parametrize("cost_model", [CostModel(), P100_COST_MODEL,
                                        CostModel(latency_us_per_op=2.5,
                                                  bandwidth_gib_s=3.0)])
def test_scheme_wall_time_ordering_on_llinit_cells(cost_model):
    for k in (2, 6, 10):
        for n in (100, 2000):
            spec = LinearSpec(k, n, "LLinit_LLused")
            walls = {scheme: run_case(spec, scheme, cost_model).sim_wall_us
                     for scheme in ("pointerchain", "marshalling", "naive")}
            assert walls["pointerchain"] < walls["marshalling"] < walls["naive"]


def test_all_schemes_verify_on_dense():
    for scheme in ("uvm", "marshalling", "pointerchain", "naive"):
        metrics = run_case(DenseSpec(2, 50, 3), scheme)
        assert metrics.verified
        assert metrics.scenario == "dense"


def test_sweep_merges_in_deterministic_key_order():
    cases = [(LinearSpec(2, 10, "LLinit_LLused"), s)
             for s in ("naive", "uvm", "marshalling", "pointerchain")]
    rows = sweep(cases, CostModel(), seed=1)
    schemes = [r.scheme for r in rows]
    assert schemes == sorted(schemes)


def test_execute_case_exposes_the_transfer_log():
    metrics, machine = execute_case(LinearSpec(2, 10, "LLinit_LLused"),
                                    "pointerchain", CostModel())
    dump = machine.log.dump()
    assert "H2D,bulk,80," in dump and "D2H,bulk,80," in dump
    assert metrics.verified


def test_cost_model_validation_and_file_loading(tmp_path):
    with pytest.raises(ValueError):
        CostModel(latency_us_per_op=0)
    with pytest.raises(ValueError):
        CostModel(spill_penalty=0.5)
    cfg = tmp_path / "cost.cfg"
    cfg.write_text("latency_us_per_op = 2.0\n# comment\nl2_bytes = 1048576\n")
    cm = CostModel.from_file(cfg)
    assert cm.latency_us_per_op == 2.0
    assert cm.l2_bytes == 1048576
    assert cm.bandwidth_gib_s == CostModel().bandwidth_gib_s
    bad = tmp_path / "bad.cfg"
    bad.write_text("nope = 3\n")
    with pytest.raises(ValueError):
        CostModel.from_file(bad)
