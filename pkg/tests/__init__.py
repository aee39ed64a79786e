"""boxentropy test package."""

try:
    import pytest
except Exception:
    pass
else:
    # case and suite modules carry the assertions
    pytest.register_assert_rewrite("tests.scenarios.cases", "tests.integration")
