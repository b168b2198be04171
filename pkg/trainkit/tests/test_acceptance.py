"""Trainer acceptance gate.

One test for the stage contract: run the full three-stage schedule on
the 32-patch toy manifest and check, from the run's own artifacts, that
the trainable sets nest strictly, the scheduled (epochs, lr) tuples
match the published tables exactly, and every JPEG-quality draw fell in
[50, 100]. Prints one PASS line on success. Budget: 5 minutes on CPU.
"""

from trainkit.model import build_model, trainable_parameter_names
from trainkit.schedules import PRESETS

PUBLISHED_TABLES = {
    "cdc": ((1, 1e-2), (1, 1e-5), (8, 1e-8)),
    "cdc-bhc": ((1, 1e-1), (1, 1e-4), (4, 1e-7)),
    "metis-s112-p224": ((1, 1e-1), (1, 1e-4), (4, 1e-7)),
    "metis-s224-p224": ((1, 1e-2), (1, 1e-5), (4, 1e-8)),
    "web-s112-p224": ((1, 1e-1), (1, 1e-4), (4, 1e-7)),
    "web-s224-p224": ((1, 1e-2), (1, 1e-5), (4, 1e-8)),
    "concat-s112-p224": ((1, 1e-2), (1, 1e-5), (1, 1e-8)),
    "concat-s224-p224": ((1, 1e-2), (1, 1e-5), (4, 1e-8)),
}


def test_criterion_trainer_stage_contract(trained_run, toy_dataset):
    result, elapsed = trained_run

    # scheduled tuples: the executed run used metis-s112-p224
    stages = result.log["stages"]
    executed = tuple((s["epochs"], s["learning_rate"]) for s in stages)
    assert executed == PUBLISHED_TABLES["metis-s112-p224"]

    # and every preset matches its published table exactly
    assert set(PRESETS) == set(PUBLISHED_TABLES)
    for name, sched in PRESETS.items():
        assert sched.tuples() == PUBLISHED_TABLES[name], name
        assert sched.betas == (0.9, 0.9), name

    # stage-wise trainable sets nest strictly: head < head+last < full
    model = build_model(pretrained=False)
    head = trainable_parameter_names(model, "head_only")
    mid = trainable_parameter_names(model, "head_plus_last_block")
    full = trainable_parameter_names(model, "full")
    assert head < mid < full
    assert full == {name for name, _ in model.named_parameters()}

    # the run's logged counts agree with those sets
    logged = [s["trainable_params"] for s in stages]
    sizes = []
    for scope_names in (head, mid, full):
        wanted = dict(model.named_parameters())
        sizes.append(sum(wanted[n].numel() for n in scope_names))
    assert logged == sizes

    # JPEG-quality draws: one per train-sample load, all inside [50, 100]
    drawn = result.log["jpeg_quality_drawn"]
    assert drawn["count"] == 6 * 16  # epochs x train rows
    assert 50 <= drawn["min"] <= drawn["max"] <= 100

    assert elapsed < 300.0, f"trainer took {elapsed:.1f}s, budget is 300s"
    print(f"PASS trainer stage contract: sets {len(head)}<{len(mid)}<{len(full)} "
          f"tensors nest, 8 preset tables exact, {drawn['count']} JPEG draws in "
          f"[{drawn['min']},{drawn['max']}], run took {elapsed:.1f}s")
