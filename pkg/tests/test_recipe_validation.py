from yardtower.model import (
    ApplyResult,
    MissionRecipe,
    RecipeStep,
    ServiceDomain,
    ServiceRegistration,
    validate_recipe,
)


def reg(name, domain, enabled=True):
    return ServiceRegistration(
        service_name=name, domain=domain, base_url=f"http://svc/{name}", api_key="k", enabled=enabled
    )


CATALOG = {
    "map-svc": reg("map-svc", ServiceDomain.MAP_SERVER),
    "path-svc": reg("path-svc", ServiceDomain.ASSIGNMENT_PLANNER),
    "coop-svc": reg("coop-svc", ServiceDomain.ASSIGNMENT_PLANNER),
    "store-svc": reg("store-svc", ServiceDomain.STORAGE_SERVER),
    "onboard-svc": reg("onboard-svc", ServiceDomain.AUTOMATON),
}


def unload_goods():
    return MissionRecipe(
        name="unload goods",
        description="drive a truck to a gate",
        steps=(
            RecipeStep("map_update", "map-svc", 1, apply_result=ApplyResult.MAP_WRITE),
            RecipeStep("path_planner", "path-svc", 2),
            RecipeStep(
                "coop", "coop-svc", 3, depends_on=("path_planner",),
                apply_result=ApplyResult.ASSIGNMENT_SOURCE,
            ),
        ),
    )


def codes(violations):
    return sorted(v.code for v in violations)


def test_unload_goods_recipe_is_valid():
    assert validate_recipe(unload_goods(), CATALOG) == []


def test_unknown_service():
    recipe = MissionRecipe("m", "", (RecipeStep("s1", "ghost-svc", 1),))
    assert codes(validate_recipe(recipe, CATALOG)) == ["unknown_service"]


def test_disabled_service():
    catalog = dict(CATALOG)
    catalog["path-svc"] = reg("path-svc", ServiceDomain.ASSIGNMENT_PLANNER, enabled=False)
    recipe = MissionRecipe("m", "", (RecipeStep("s1", "path-svc", 1),))
    assert codes(validate_recipe(recipe, catalog)) == ["disabled_service"]


def test_automaton_step_rejected():
    recipe = MissionRecipe("m", "", (RecipeStep("s1", "onboard-svc", 1),))
    assert "automaton_step" in codes(validate_recipe(recipe, CATALOG))


def test_map_write_on_planner_domain_rejected():
    recipe = MissionRecipe(
        "m", "", (RecipeStep("s1", "path-svc", 1, apply_result=ApplyResult.MAP_WRITE),)
    )
    assert "permission_mismatch" in codes(validate_recipe(recipe, CATALOG))


def test_assignment_source_on_map_domain_rejected():
    recipe = MissionRecipe(
        "m", "", (RecipeStep("s1", "map-svc", 1, apply_result=ApplyResult.ASSIGNMENT_SOURCE),)
    )
    assert "permission_mismatch" in codes(validate_recipe(recipe, CATALOG))


def test_depends_on_must_have_smaller_run_order():
    recipe = MissionRecipe(
        "m",
        "",
        (
            RecipeStep("a", "path-svc", 2),
            RecipeStep("b", "coop-svc", 2, depends_on=("a",)),
        ),
    )
    assert "dependency_order" in codes(validate_recipe(recipe, CATALOG))


def test_depends_on_unknown_step():
    recipe = MissionRecipe("m", "", (RecipeStep("a", "path-svc", 1, depends_on=("nope",)),))
    assert "unknown_dependency" in codes(validate_recipe(recipe, CATALOG))


def test_duplicate_step_id():
    recipe = MissionRecipe(
        "m", "", (RecipeStep("a", "path-svc", 1), RecipeStep("a", "coop-svc", 2))
    )
    assert "duplicate_step_id" in codes(validate_recipe(recipe, CATALOG))


def test_empty_recipe_and_bad_run_order():
    assert "empty_recipe" in codes(validate_recipe(MissionRecipe("m", "", ()), CATALOG))
    recipe = MissionRecipe("m", "", (RecipeStep("a", "path-svc", 0),))
    assert "bad_run_order" in codes(validate_recipe(recipe, CATALOG))


def test_all_violations_reported_not_just_first():
    recipe = MissionRecipe(
        "m",
        "",
        (
            RecipeStep("a", "ghost-svc", 1),
            RecipeStep("a", "onboard-svc", 1),
        ),
    )
    got = codes(validate_recipe(recipe, CATALOG))
    assert got == ["automaton_step", "duplicate_step_id", "unknown_service"]
