"""Worked-example knowledge points used by tests, the demo store, and docs.

Three scenarios: a car sale voidable for missing seller ownership, a software
contract with a server-specification exception, and a goods-sale refund
dispute with a timely-shipment defense. Each ships as rule text in the `.sp`
language so the fixtures double as language documentation.
"""

from __future__ import annotations

from krag.dsl import parse_statements
from krag.inference import compile_statements
from krag.knowledge import Article, KnowledgePoint, KnowledgeStore, build_store

CAR_SALE_RULES = """\
# Voidable sale: the buyer may nullify when the contract carries a defect
# the seller cannot cure by proving valid formation.
scenario {
  party bob proponent
  party alice opponent
  party court judge
}

statement nullification_right proponent bob {
  requires: contract_with_defect;
}

statement contract_with_defect proponent bob {
  requires: sale_concluded;
  except: contract_validity;
}

statement contract_validity proponent alice {
  requires: seller_ownership;
}
"""

CAR_SALE_FACTS = """\
scenario {
  party bob proponent
  party alice opponent
  party court judge
}

allege(bob, sale_concluded).
admission(alice, sale_concluded).
allege(alice, seller_ownership).
"""

CAR_SALE_TEMPLATE = (
    "[[holds]]Bob can nullify the contract: the seller's ownership was never "
    "established, so the sale carries an uncured defect and is voidable at "
    "the buyer's discretion."
    "[[fails]]Bob has no right to nullify on this record: the sale's "
    "validity stands because {{reason_label}} blocked the defect claim.[[end]]"
)

SOFTWARE_CONTRACT_RULES = """\
# Refund for a failed security test, excused when the client's own server
# specifications caused the failure.
scenario {
  party linda proponent
  party company opponent
  party court judge
}

statement refund_entitlement proponent linda {
  requires: contract_concluded, security_test_failed;
  except: server_specs_inadequate;
}
"""

SOFTWARE_CONTRACT_FACTS = """\
scenario {
  party linda proponent
  party company opponent
  party court judge
}

allege(linda, contract_concluded).
admission(company, contract_concluded).
allege(linda, security_test_failed).
admission(company, security_test_failed).
allege(company, server_specs_inadequate).
provide_evidence(company, server_specs_inadequate, "project initiation disclosure").
plausible(court, server_specs_inadequate).
"""

SOFTWARE_CONTRACT_TEMPLATE = (
    "[[holds]]Linda can enforce the breach and demand the refund: the "
    "security failure stands unexcused."
    "[[fails]]Linda cannot enforce the refund claim: the software company's "
    "exception holds, so liability for the failed test does not attach.[[end]]"
)

GOODS_SALE_RULES = """\
# Refund claim over undelivered goods; the seller defends with timely
# shipment, force majeure, or an approved delivery extension.
scenario {
  party buyer proponent
  party seller opponent
  party court judge
}

statement refund_due proponent buyer {
  requires: contract_formed, refund_demanded, damages_incurred;
  except: shipment_defense, force_majeure, approved_extension;
}

statement shipment_defense proponent seller {
  requires: shipment_on_time, delay_beyond_control;
}
"""

GOODS_SALE_TEMPLATE = (
    "[[holds]]The buyer is owed the refund with damages: every element of "
    "the claim is established and no seller defense holds."
    "[[fails]]The refund claim fails on this record: {{reason}} "
    "({{reason_label}}).[[end]]"
)


def _point(
    point_id: str,
    rules: str,
    query: str,
    template: str,
    articles: tuple[Article, ...],
    tags: tuple[str, ...],
) -> KnowledgePoint:
    graph = compile_statements(parse_statements(rules))
    return KnowledgePoint(point_id, query, articles, graph, template, verified=True, tags=tags)


def car_sale_point() -> KnowledgePoint:
    return _point(
        "car_sale_ownership_defect",
        CAR_SALE_RULES,
        "Alice sells her car to Bob for $10,000. Bob later discovers that "
        "Alice was not the legal owner of the car. Can Bob nullify the contract?",
        CAR_SALE_TEMPLATE,
        (
            Article(
                "sale-ownership-1",
                "Transfer by a non-owner",
                "A purchaser may void a sale where the transferor lacked "
                "ownership of the thing sold at the moment of transfer.",
            ),
            Article(
                "sale-ownership-2",
                "Voidable contracts",
                "A contract concluded under a defect of essential conditions "
                "is voidable at the discretion of the injured party.",
            ),
        ),
        ("sale", "ownership", "nullification"),
    )


def software_contract_point() -> KnowledgePoint:
    return _point(
        "software_contract_security_tests",
        SOFTWARE_CONTRACT_RULES,
        "Linda's custom software fails one critical security test and she "
        "demands a refund, but the developer blames her own server "
        "specifications, disclosed at project initiation. Can Linda legally "
        "enforce the breach of contract?",
        SOFTWARE_CONTRACT_TEMPLATE,
        (
            Article(
                "works-acceptance-7",
                "Defects attributable to the ordering party",
                "A contractor is exempt from warranty where the defect arises "
                "from materials or instructions furnished by the ordering "
                "party, provided the contractor gave notice.",
            ),
        ),
        ("software", "warranty", "exception"),
    )


def goods_sale_point() -> KnowledgePoint:
    return _point(
        "goods_sale_refund",
        GOODS_SALE_RULES,
        "A buyer demands a refund plus compensation after goods were never "
        "delivered under a sales agreement. The seller answers that shipment "
        "left on schedule and any delay was beyond its control. Is the "
        "refund due?",
        GOODS_SALE_TEMPLATE,
        (
            Article(
                "delivery-obligations-3",
                "Seller's duty to deliver",
                "The seller must deliver conforming goods at the agreed time; "
                "on failure the buyer may demand restitution of the price and "
                "compensation for loss.",
            ),
            Article(
                "delivery-obligations-9",
                "Impediments beyond control",
                "An obligor is not liable for delay caused by an impediment "
                "beyond its control that it could not reasonably have avoided.",
            ),
        ),
        ("sale", "delivery", "refund"),
    )


def demo_store() -> KnowledgeStore:
    """The three worked-example points as one store."""
    return build_store([car_sale_point(), software_contract_point(), goods_sale_point()])
