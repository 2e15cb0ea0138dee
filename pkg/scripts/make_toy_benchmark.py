"""Generate the bundled 36-question toy benchmark (HotPotQA JSON layout).

A small fictional world of countries, people and companies. Questions are
one- or two-hop lookups over its passages; each instance carries its
supporting passages plus distractors drawn from the same pool.

    python scripts/make_toy_benchmark.py > src/graphtune/data/toy_hotpotqa.json
"""

from __future__ import annotations

import json
import random
import sys

COUNTRIES = [
    ("Veloria", "Marisport", "Velorian Crown", "timber"),
    ("Ostrland", "Halvik", "Ostrish Mark", "copper"),
    ("Quenmark", "Trennor", "Quen Dollar", "wool"),
    ("Darvania", "Belcastra", "Darvish Lira", "olive oil"),
    ("Solvary", "Orvale", "Solvary Franc", "salt"),
    ("Tiberon", "Pellmar", "Tiberon Shell", "coffee"),
    ("Kaldera", "Zunhaven", "Kalderan Ring", "glass"),
    ("Norvessa", "Grisholm", "Norvessan Krone", "fish"),
]

COMPANIES = [
    ("Brightwater Labs", "Ada Voskuijlen", 1921),
    ("Corvane Instruments", "Milo Hartigan", 1934),
    ("Ferrowind Shipping", "Ilse Marchetti", 1908),
    ("Quillstone Press", "Bruno Okonkwo", 1952),
    ("Heliodor Motors", "Sabine Whitlock", 1967),
    ("Larkspur Textiles", "Teodor Anand", 1899),
    ("Ember Valley Foods", "Greta Lindqvist", 1946),
    ("Tamsin Aerospace", "Oskar Penhallow", 1978),
]

PRIZES = ["Harrow Prize", "Aldane Medal", "Copperfield Award", "Sable Honour"]
JOBS = ["chemist", "engineer", "novelist", "architect", "economist", "surveyor"]

PEOPLE = [
    "Tessa Dunmore", "Rafael Quintero", "Nadia Kosterin", "Elias Brandt",
    "Lucia Fenwick", "Jonas Ekwueme", "Mira Castellan", "Henrik Solberg",
    "Priya Ramaswamy", "Owen Talbridge", "Yara Belhadj", "Felix Aurenhammer",
]

# Entity-free filler; words kept out of every question template.
FILLER = [
    "the weather there is usually mild in spring and wet in late autumn.",
    "local markets open early and close well before sunset on most days.",
    "travellers often remark on the quiet streets and the smell of bread.",
    "several small museums keep collections of maps, coins and old tools.",
    "a network of narrow roads links the outlying farms to the towns.",
    "public gardens are maintained by volunteers and are free to visit.",
    "the local dialect has many words for rain, fog and low cloud.",
    "older buildings are made of grey stone with steep slate roofs.",
    "most residents cycle to work and trains run every half hour.",
    "festivals in summer bring music, dancing and long shared meals.",
    "the surrounding hills are popular with walkers and painters alike.",
    "schools teach two languages from an early age as a matter of course.",
]


def filler(rng: random.Random, n: int) -> list[str]:
    picks = [rng.choice(FILLER) for _ in range(n)]
    return [s[0].upper() + s[1:] for s in picks]


def build(seed: int = 2024) -> list[dict]:
    rng = random.Random(seed)
    passages: dict[str, list[str]] = {}

    for country, capital, currency, export in COUNTRIES:
        passages[country] = [
            f"{capital} is the capital of the country {country}.",
            *filler(rng, 9),
            f"The main export is {export} and the currency is the {currency}.",
            *filler(rng, 9),
        ]

    companies = {}
    for i, (name, founder, year) in enumerate(COMPANIES):
        city = COUNTRIES[(i * 3) % len(COUNTRIES)][1]
        companies[name] = (founder, year, city)
        passages[name] = [
            f"{name} was founded by {founder}.",
            *filler(rng, 6),
            f"{name} opened its first office in {year}.",
            f"{name} is headquartered in {city}.",
            *filler(rng, 6),
        ]

    people = {}
    for i, person in enumerate(PEOPLE):
        city = COUNTRIES[(i * 5 + 1) % len(COUNTRIES)][1]
        company = COMPANIES[(i * 3 + 2) % len(COMPANIES)][0]
        job = JOBS[i % len(JOBS)]
        prize = PRIZES[i % len(PRIZES)]
        year = 1980 + (i * 7) % 40
        people[person] = (city, company, prize)
        passages[person] = [
            f"{person} was born in {city}.",
            *filler(rng, 6),
            f"{person} is a {job} who works for {company}.",
            f"{person} received the {prize} in {year}.",
            *filler(rng, 6),
        ]

    country_of = {capital: country for country, capital, _, _ in COUNTRIES}

    # (question, answer, supporting passage titles)
    questions: list[tuple[str, str, list[str]]] = []
    for country, capital, _, _ in COUNTRIES[:6]:
        questions.append((f"What is the capital of {country}?", capital, [country]))
    for person in PEOPLE[:6]:
        city = people[person][0]
        questions.append((f"In which country was {person} born?", country_of[city], [person, country_of[city]]))
    for name in list(companies)[:6]:
        questions.append((f"Who founded {name}?", companies[name][0], [name]))
    for name in list(companies)[2:8]:
        questions.append(
            (f"In which year was the first office of {name} opened?", str(companies[name][1]), [name])
        )
    for person in PEOPLE[6:12]:
        company = people[person][1]
        questions.append(
            (f"Who founded the company that {person} works for?", companies[company][0], [person, company])
        )
    for person in PEOPLE[:3] + PEOPLE[9:12]:
        company = people[person][1]
        questions.append(
            (
                f"In which city is the company that {person} works for headquartered?",
                companies[company][2],
                [person, company],
            )
        )

    titles = sorted(passages)
    records = []
    for i, (question, answer, support) in enumerate(questions):
        distractors = rng.sample([t for t in titles if t not in support], 3)
        context_titles = support + distractors
        rng.shuffle(context_titles)
        records.append(
            {
                "_id": f"toy-{i:03d}",
                "question": question,
                "answer": answer,
                "supporting_facts": [[t, 0] for t in support],
                "context": [[t, passages[t]] for t in context_titles],
                "type": "bridge" if len(support) > 1 else "single",
                "level": "easy",
            }
        )
    return records


if __name__ == "__main__":
    json.dump(build(), sys.stdout, indent=1, ensure_ascii=False)
    sys.stdout.write("\n")
