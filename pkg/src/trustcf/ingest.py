"""Readers for the two supported raw dump families.

Yelp dumps are JSON-lines files (business, review, user, tip).  The
LibraryThing dump stores one review per line as a JSON or Python-literal
dict, plus a whitespace-separated friend-pair file.  Both readers:

* intern every user/item id they encounter, so references always resolve;
* collapse duplicate (user, item) reviews onto the latest by source
  timestamp, counting the collisions;
* drop reviews without a usable rating (missing, null or outside the
  1..5 scale), counting the drops.

Raw field quirks are normalized here and nowhere else: comma-separated
friend/elite strings vs. real lists, feedback counts nested in a
``votes`` object vs. flat fields, tip appreciation named ``likes`` vs.
``compliment_count``.
"""

from __future__ import annotations

import ast
import json
from importlib import resources
from pathlib import Path
from typing import Iterator

from .dataset import Dataset, IngestWarnings, make_dataset
from .errors import MalformedRecord, MissingFile


def _require(path: Path) -> Path:
    if not path.is_file():
        raise MissingFile(f"required input file not found: {path}")
    return path


def _iter_json_lines(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(path.name, line_no, f"invalid JSON: {exc}") from None
            if not isinstance(record, dict):
                raise MalformedRecord(path.name, line_no, "expected a JSON object")
            yield line_no, record


def _listish(raw) -> list[str]:
    """Normalize Yelp's sometimes-string, sometimes-list fields."""
    if raw is None:
        return []
    if isinstance(raw, str):
        return [part for part in (p.strip() for p in raw.split(",")) if part and part != "None"]
    return [str(part).strip() for part in raw if str(part).strip()]


def _int_field(record: dict, name: str, source: str, line_no: int) -> int:
    raw = record.get(name, 0)
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise MalformedRecord(source, line_no, f"{name} is not an integer") from None
    return max(value, 0)


def ingest_yelp(
    business_file: str | Path,
    review_file: str | Path,
    user_file: str | Path,
    tip_file: str | Path,
) -> Dataset:
    """Read a Yelp dump into a Dataset.

    Stars become ratings; review useful/funny/cool counts become
    per-review feedback; user profiles contribute elite years, the three
    compliment counters (write-more, thank-you notes, good-writer), fan
    counts and the friend graph; tips contribute their count and
    received appreciation per author.
    """
    business_file = _require(Path(business_file))
    review_file = _require(Path(review_file))
    user_file = _require(Path(user_file))
    tip_file = _require(Path(tip_file))

    categories: dict[str, list[str]] = {}
    for line_no, record in _iter_json_lines(business_file):
        business = record.get("business_id")
        if not business:
            raise MalformedRecord(business_file.name, line_no, "missing business_id")
        categories[str(business)] = _listish(record.get("categories"))

    # (user, item) -> (sort key, stars, useful, funny, cool)
    reviews: dict[tuple[str, str], tuple[tuple[str, int], float, int, int, int]] = {}
    duplicates = 0
    for line_no, record in _iter_json_lines(review_file):
        user = record.get("user_id")
        business = record.get("business_id")
        stars = record.get("stars")
        if not user or not business:
            raise MalformedRecord(review_file.name, line_no, "missing user_id or business_id")
        try:
            rating = float(stars)
        except (TypeError, ValueError):
            raise MalformedRecord(review_file.name, line_no, "stars is not numeric") from None
        if not 1.0 <= rating <= 5.0:
            raise MalformedRecord(review_file.name, line_no, f"stars {rating} outside 1..5")
        votes = record.get("votes") if isinstance(record.get("votes"), dict) else record
        useful = _int_field(votes, "useful", review_file.name, line_no)
        funny = _int_field(votes, "funny", review_file.name, line_no)
        cool = _int_field(votes, "cool", review_file.name, line_no)
        key = (str(user), str(business))
        stamp = (str(record.get("date") or ""), line_no)
        previous = reviews.get(key)
        if previous is not None:
            duplicates += 1
            if stamp < previous[0]:
                continue
        reviews[key] = (stamp, rating, useful, funny, cool)

    elite_years: dict[str, int] = {}
    more: dict[str, int] = {}
    thx: dict[str, int] = {}
    gw: dict[str, int] = {}
    fans: dict[str, int] = {}
    friend_edges: list[tuple[str, str]] = []
    seen_users: set[str] = set()
    for line_no, record in _iter_json_lines(user_file):
        user = record.get("user_id")
        if not user:
            raise MalformedRecord(user_file.name, line_no, "missing user_id")
        user = str(user)
        seen_users.add(user)
        elite_years[user] = len(_listish(record.get("elite")))
        more[user] = _int_field(record, "compliment_more", user_file.name, line_no)
        thx[user] = _int_field(record, "compliment_note", user_file.name, line_no)
        gw[user] = _int_field(record, "compliment_writer", user_file.name, line_no)
        fans[user] = _int_field(record, "fans", user_file.name, line_no)
        for friend in _listish(record.get("friends")):
            if friend != user:
                friend_edges.append((user, friend))
                seen_users.add(friend)

    tip_likes: dict[str, int] = {}
    tip_count: dict[str, int] = {}
    for line_no, record in _iter_json_lines(tip_file):
        user = record.get("user_id")
        if not user:
            raise MalformedRecord(tip_file.name, line_no, "missing user_id")
        user = str(user)
        name = "likes" if "likes" in record else "compliment_count"
        tip_likes[user] = tip_likes.get(user, 0) + _int_field(record, name, tip_file.name, line_no)
        tip_count[user] = tip_count.get(user, 0) + 1
        seen_users.add(user)

    review_useful: dict[str, int] = {}
    review_funny: dict[str, int] = {}
    review_cool: dict[str, int] = {}
    review_count: dict[str, int] = {}
    useful_map: dict[tuple[str, str], int] = {}
    funny_map: dict[tuple[str, str], int] = {}
    cool_map: dict[tuple[str, str], int] = {}
    rating_rows: list[tuple[str, str, float]] = []
    for (user, business), (_, rating, useful, funny, cool) in reviews.items():
        rating_rows.append((user, business, rating))
        review_useful[user] = review_useful.get(user, 0) + useful
        review_funny[user] = review_funny.get(user, 0) + funny
        review_cool[user] = review_cool.get(user, 0) + cool
        review_count[user] = review_count.get(user, 0) + 1
        if useful:
            useful_map[(user, business)] = useful
        if funny:
            funny_map[(user, business)] = funny
        if cool:
            cool_map[(user, business)] = cool

    return make_dataset(
        provenance="yelp",
        ratings=rating_rows,
        friends=friend_edges,
        user_counters={
            "elite_years": elite_years,
            "more": more,
            "thx": thx,
            "gw": gw,
            "fans": fans,
            "tip_likes": tip_likes,
            "tip_count": tip_count,
            "review_useful": review_useful,
            "review_funny": review_funny,
            "review_cool": review_cool,
            "review_count": review_count,
        },
        review_counters={"useful": useful_map, "funny": funny_map, "cool": cool_map},
        categories={b: tags for b, tags in categories.items() if tags},
        extra_users=seen_users,
        extra_items=categories.keys(),
        warnings=IngestWarnings(duplicate_ratings=duplicates),
    )


def _parse_librarything_line(source: str, line_no: int, line: str) -> dict:
    start = line.find("{")
    if start < 0:
        raise MalformedRecord(source, line_no, "no record found on line")
    body = line[start:]
    try:
        record = json.loads(body)
    except json.JSONDecodeError:
        try:
            record = ast.literal_eval(body)
        except (ValueError, SyntaxError) as exc:
            raise MalformedRecord(source, line_no, f"unparseable record: {exc}") from None
    if not isinstance(record, dict):
        raise MalformedRecord(source, line_no, "expected a dict record")
    return record


def ingest_librarything(review_file: str | Path, friend_file: str | Path) -> Dataset:
    """Read a LibraryThing dump into a Dataset.

    Reviews carry a star rating and a helpfulness count; reviews whose
    stars are missing, null, zero or outside the 1..5 scale are dropped
    and counted.  The friend file lists one user pair per line.
    """
    review_file = _require(Path(review_file))
    friend_file = _require(Path(friend_file))

    # (user, work) -> (sort key, stars, nhelpful)
    reviews: dict[tuple[str, str], tuple[tuple[int, int], float, int]] = {}
    duplicates = 0
    dropped = 0
    with open(review_file, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            record = _parse_librarything_line(review_file.name, line_no, line)
            user = record.get("user")
            work = record.get("work")
            if user is None or work is None:
                raise MalformedRecord(review_file.name, line_no, "missing user or work")
            stars = record.get("stars")
            try:
                rating = float(stars) if stars is not None else 0.0
            except (TypeError, ValueError):
                raise MalformedRecord(review_file.name, line_no, "stars is not numeric") from None
            if not 1.0 <= rating <= 5.0:
                dropped += 1
                continue
            nhelpful = record.get("nhelpful") or 0
            try:
                nhelpful = max(int(nhelpful), 0)
            except (TypeError, ValueError):
                raise MalformedRecord(review_file.name, line_no, "nhelpful is not an integer") from None
            try:
                stamp = (int(record.get("unixtime") or 0), line_no)
            except (TypeError, ValueError):
                stamp = (0, line_no)
            key = (str(user), str(work))
            previous = reviews.get(key)
            if previous is not None:
                duplicates += 1
                if stamp < previous[0]:
                    continue
            reviews[key] = (stamp, rating, nhelpful)

    friend_edges: list[tuple[str, str]] = []
    friend_users: set[str] = set()
    with open(friend_file, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise MalformedRecord(friend_file.name, line_no, "expected two user ids")
            a, b = parts
            if a != b:
                friend_edges.append((a, b))
            friend_users.update(parts)

    nhelpful_total: dict[str, int] = {}
    review_count: dict[str, int] = {}
    nhelpful_map: dict[tuple[str, str], int] = {}
    rating_rows: list[tuple[str, str, float]] = []
    for (user, work), (_, rating, nhelpful) in reviews.items():
        rating_rows.append((user, work, rating))
        nhelpful_total[user] = nhelpful_total.get(user, 0) + nhelpful
        review_count[user] = review_count.get(user, 0) + 1
        if nhelpful:
            nhelpful_map[(user, work)] = nhelpful

    return make_dataset(
        provenance="librarything",
        ratings=rating_rows,
        friends=friend_edges,
        user_counters={
            "nhelpful_total": nhelpful_total,
            "review_count": review_count,
        },
        review_counters={"nhelpful": nhelpful_map},
        extra_users=friend_users,
        warnings=IngestWarnings(duplicate_ratings=duplicates, dropped_unrated=dropped),
    )


def load_category_closure(path: str | Path) -> frozenset[str]:
    """Category tags from a text file, one per line, '#' comments allowed."""
    path = _require(Path(path))
    tags = set()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.split("#", 1)[0].strip()
            if line:
                tags.add(line)
    return frozenset(tags)


def restaurants_food_closure() -> frozenset[str]:
    """The bundled restaurants-and-food category closure."""
    text = resources.files("trustcf").joinpath(
        "data/restaurants_food_categories.txt"
    ).read_text(encoding="utf-8")
    tags = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tags.add(line)
    return frozenset(tags)
