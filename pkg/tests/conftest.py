import pytest

from util import disjoint_two_cycles_schedule, knot_churn_schedule


@pytest.fixture
def churn_schedule():
    return knot_churn_schedule()


@pytest.fixture
def disjoint_schedule():
    return disjoint_two_cycles_schedule()
