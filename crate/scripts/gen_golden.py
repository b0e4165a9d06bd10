#!/usr/bin/env python3
"""Builds the golden fixture corpus under crates/core/tests/data/golden.

Everything expected by the tests (planted links, labels, report CSVs) is
computed here from the generator's own bookkeeping, independently of the
Rust code under test. Output is deterministic; rerun after editing and
commit the result.
"""

import csv
import io
import json
import random
import shutil
from datetime import date
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "crates/core/tests/data/golden"
LANGID_EVAL = ROOT / "crates/core/data/langid/eval"

rng = random.Random(20200901)

PLATFORM_ORDER = [
    "twitter", "youtube", "reddit", "facebook", "instagram",
    "wikipedia", "pinterest", "tiktok", "gab", "whatsapp",
]

LABEL_MAP = {
    "false": "false", "fake": "false", "incorrect": "false",
    "pants on fire": "false", "no evidence": "false",
    "partially false": "partially_false", "partly false": "partially_false",
    "misleading": "partially_false", "mostly false": "partially_false",
    "half true": "partially_false", "missing context": "partially_false",
    "true": "true", "correct": "true", "mostly true": "true",
}


def norm_label(raw):
    return LABEL_MAP.get(" ".join(raw.split()).lower(), "other")


MONTHS = ["January", "February", "March", "April", "May", "June", "July",
          "August", "September", "October", "November", "December"]


def eval_snippets(lang):
    text = (LANGID_EVAL / f"{lang}.txt").read_text(encoding="utf-8")
    return [s.strip() for s in text.split("\n\n") if s.strip()]


# ---------------------------------------------------------------- articles

PY_VERDICTS = [
    "False", "Misleading", "FALSE", "Pants on Fire", "Mostly False",
    "Half True", "Partly false", "Missing context", "False", "Mostly True",
    "No evidence", "Explanatory", "Fake", "Incorrect", "False",
    "Misleading", "True", "Correct", "False", "Partially false",
    "Falso", "Engañoso", "Faux", "False", "Falsch",
    "Falso", "False", "Misleading", "Falso", "False",
]
SP_VERDICTS = [
    "Mostly True", "False", "Miscaptioned", "Mixture", "True",
    "False", None, "Labeled Satire", "Mostly False", "Outdated",
]
PY_PUBLISHERS = ["PolitiFact", "AFP", "Full Fact", "BOOM", "Maldita.es",
                 "Les Decodeurs", "Correctiv", "Lupa", "Facta", "Vishvas News"]
PY_COUNTRIES = [["United States"], ["Australia"], ["United Kingdom"], ["India"],
                ["Spain"], ["France"], ["Germany"], ["Brazil"], ["Italy"],
                ["India", "Nepal"]]
PY_LANGS = ["en"] * 20 + ["es", "es", "fr", "en", "de", "pt", "en", "en", "it", "hi"]


def article_date(i, source):
    if source == "SP" and i == 6:
        return None
    if source == "PY" and i in (9, 10):
        return date(2020, 9, 1)
    base = date(2020, 2, 3).toordinal()
    step = 7 if source == "PY" else 11
    offset = 3 if source == "SP" else 0
    return date.fromordinal(base + offset + step * i)


articles = []
for i in range(1, 31):
    nid = f"PY{i}"
    a = {
        "news_id": nid,
        "source": "PY",
        "date": article_date(i, "PY"),
        "verdict": PY_VERDICTS[i - 1],
        "publisher": PY_PUBLISHERS[(i - 1) % len(PY_PUBLISHERS)],
        "countries": PY_COUNTRIES[(i - 1) % len(PY_COUNTRIES)],
        "lang": PY_LANGS[i - 1],
        "title": f"Claim {i} about the pandemic response does not hold up",
        "slug": f"claim-{i:03d}",
    }
    if i == 9:
        a.update(
            title="A video shows a rally against coronavirus restrictions in the British capital of London.",
            verdict="False",
            publisher="AFP",
            countries=["Australia"],
            slug="video-actually-shows-anti-government-protest-belarus",
        )
    articles.append(a)
for i in range(1, 11):
    articles.append({
        "news_id": f"SP{i}",
        "source": "SP",
        "date": article_date(i, "SP"),
        "verdict": SP_VERDICTS[i - 1],
        "hint": "Unproven" if SP_VERDICTS[i - 1] is None else None,
        "publisher": "Snopes",
        "countries": [],
        "lang": "en",
        "title": f"Did a viral post get rumour number {i} right?",
        "slug": f"rumour-{i:02d}",
    })
by_id = {a["news_id"]: a for a in articles}
for a in articles:
    a.setdefault("hint", None)
    a["links"] = []
    a["decoys"] = []
    a["label_raw"] = a["verdict"] if a["verdict"] is not None else a["hint"]
    a["label_norm"] = norm_label(a["label_raw"])

# ---------------------------------------------------------------- posts

PLATFORM_SIZES = {
    "twitter": 40, "youtube": 26, "reddit": 3, "facebook": 23,
    "instagram": 3, "wikipedia": 2, "pinterest": 1, "tiktok": 1, "whatsapp": 1,
}
DELETED = {"twitter": 6, "youtube": 3, "facebook": 1}
FETCHED_DOUBLES = {"twitter": 5, "youtube": 3, "facebook": 2}
MODALITIES = {
    "twitter": ["text"] * 12 + ["image"] * 6 + ["text+image"] * 10 + ["video"] * 6,
    "youtube": ["video"] * 23,
    "facebook": ["text"] * 6 + ["image"] * 4 + ["text+image"] * 8 + ["video"] * 4,
    "instagram": ["image", "text+image", "video"],
    "reddit": ["text"] * 3,
    "wikipedia": ["text"] * 2,
    "pinterest": ["image"],
    "tiktok": ["video"],
    "whatsapp": ["text"],
}
UNDATED = {"twitter": 4, "facebook": 2, "reddit": 3, "wikipedia": 2, "whatsapp": 1}

SUBREDDITS = ["Coronavirus", "conspiracy", "worldnews"]
WIKI_TITLES = ["Hydroxychloroquine", "5G_conspiracy_theories"]
ALNUM = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"


def new_uid(platform, n):
    if platform == "twitter":
        return str(1230000000000000000 + rng.randrange(10**17))
    if platform == "youtube":
        return "".join(rng.choice(ALNUM + "-_") for _ in range(11))
    if platform == "reddit":
        return SUBREDDITS[n]
    if platform == "facebook":
        return str(2500000000000000 + rng.randrange(10**15))
    if platform == "instagram":
        return "B" + "".join(rng.choice(ALNUM) for _ in range(10))
    if platform == "wikipedia":
        return WIKI_TITLES[n]
    if platform == "pinterest":
        return str(500000000000000000 + rng.randrange(10**16))
    if platform == "tiktok":
        return str(6800000000000000000 + rng.randrange(10**17))
    if platform == "whatsapp":
        return "".join(rng.choice(ALNUM) for _ in range(22))
    raise ValueError(platform)


posts = []  # dicts: platform, uid, status, modality, posted_at, citations
for platform in PLATFORM_ORDER:
    size = PLATFORM_SIZES.get(platform, 0)
    if size == 0:
        continue
    uids = set()
    plist = []
    for n in range(size):
        uid = new_uid(platform, n)
        assert uid not in uids
        uids.add(uid)
        plist.append({"platform": platform, "uid": uid, "citations": []})
    n_del = DELETED.get(platform, 0)
    for p in plist[:n_del]:
        p["status"] = "deleted"
        p["cites"] = 2
    fetched = plist[n_del:]
    mods = list(MODALITIES[platform])
    rng.shuffle(mods)
    for p, m in zip(fetched, mods, strict=True):
        p["status"] = "fetched"
        p["modality"] = m
        p["cites"] = 1
    for p in fetched[:FETCHED_DOUBLES.get(platform, 0)]:
        p["cites"] = 2
    undated = set(rng.sample(range(len(fetched)), UNDATED.get(platform, 0)))
    for k, p in enumerate(fetched):
        if k in undated:
            p["posted_at"] = None
        else:
            day = date(2020, 1, 6).toordinal() + rng.randrange(300)
            d = date.fromordinal(day)
            p["posted_at"] = f"{d.isoformat()}T{rng.randrange(24):02d}:{rng.randrange(60):02d}:00Z"
    for p in plist[:n_del]:
        p["posted_at"] = None
    posts.extend(plist)

assert len(posts) == 100
assert sum(p["cites"] for p in posts) == 120

# ---------------------------------------------------------------- citations

LINKED = [f"PY{i}" for i in range(1, 17)] + [f"SP{i}" for i in range(1, 7)]
FETCHED_PAIRS = [
    ("PY9", "PY10"), ("PY1", "SP1"), ("PY2", "PY3"), ("PY4", "SP2"),
    ("PY5", "PY6"), ("PY7", "SP3"), ("PY8", "PY11"), ("PY12", "SP4"),
    ("PY13", "PY14"), ("PY15", "SP6"),
]
DELETED_PAIRS = [
    ("PY16", "SP6"), ("PY1", "PY2"), ("PY3", "PY4"), ("SP1", "SP2"),
    ("PY5", "PY7"), ("PY6", "PY8"), ("PY9", "PY11"), ("PY10", "PY12"),
    ("PY13", "SP3"), ("PY14", "PY15"),
]

doubles_f = [p for p in posts if p["status"] == "fetched" and p["cites"] == 2]
doubles_d = [p for p in posts if p["status"] == "deleted"]
singles = [p for p in posts if p["cites"] == 1]
assert len(doubles_f) == 10 and len(doubles_d) == 10 and len(singles) == 80
for p, pair in zip(doubles_f, FETCHED_PAIRS, strict=True):
    p["citations"] = list(pair)
for p, pair in zip(doubles_d, DELETED_PAIRS, strict=True):
    p["citations"] = list(pair)
rng.shuffle(singles)
for k, p in enumerate(singles):
    p["citations"] = [LINKED[k % len(LINKED)]]
for p in posts:
    # A post nobody dates would fall out of the timeline.
    if p["posted_at"] is None:
        assert any(by_id[n]["date"] for n in p["citations"]), p
    for nid in p["citations"]:
        by_id[nid]["links"].append(p)

# ---------------------------------------------------------------- URLs

TW_USERS = ["newsdesk", "user_name", "HealthWatch", "viral_clips", "citizen42"]
FB_PAGES = ["WHO", "dailyupdates", "HealthPage"]


def post_urls(p):
    """Primary anchor URL plus optional extra anchors to the same post."""
    uid, plat = p["uid"], p["platform"]
    r = rng.random()
    extras = []
    if plat == "twitter":
        user = rng.choice(TW_USERS)
        if r < 0.2:
            url = f"https://twitter.com/{user}/status/{uid}?s=20"
        elif r < 0.3:
            url = f"HTTP://Twitter.com/{user}/status/{uid}#reply"
        elif r < 0.4:
            url = f"https://mobile.twitter.com/{user}/status/{uid}/photo/1"
        else:
            url = f"https://twitter.com/{user}/status/{uid}"
        if rng.random() < 0.25:
            extras.append(f"https://twitter.com/{user}/status/{uid}?ref_src=twsrc%5Etfw")
    elif plat == "youtube":
        if r < 0.3:
            url = f"https://youtu.be/{uid}"
        elif r < 0.5:
            url = f"https://www.youtube.com/watch?v={uid}&t=43"
        elif r < 0.6:
            url = f"https://m.youtube.com/watch?feature=share&v={uid}"
        else:
            url = f"https://www.youtube.com/watch?v={uid}"
        if rng.random() < 0.2:
            extras.append(f"https://www.youtube.com/watch?v={uid}&utm_source=newsletter")
    elif plat == "reddit":
        url = rng.choice([
            f"https://www.reddit.com/r/{uid}/",
            f"https://old.reddit.com/r/{uid}/comments/fx{rng.randrange(1000)}/some_thread/",
        ])
    elif plat == "facebook":
        page = rng.choice(FB_PAGES)
        if r < 0.5:
            url = f"https://www.facebook.com/{page}/posts/{uid}"
        elif r < 0.75:
            url = f"https://www.facebook.com/{page}/videos/{uid}/"
        else:
            url = f"https://www.facebook.com/permalink.php?story_fbid={uid}&id=100{rng.randrange(10**6)}"
        if rng.random() < 0.2:
            extras.append(f"https://www.facebook.com/{page}/posts/{uid}?fbclid=IwAR0xyz")
    elif plat == "instagram":
        url = rng.choice([f"https://www.instagram.com/p/{uid}/", f"https://www.instagram.com/reel/{uid}/?igshid=abc"])
    elif plat == "wikipedia":
        url = f"https://en.wikipedia.org/wiki/{uid}"
    elif plat == "pinterest":
        url = f"https://www.pinterest.com/pin/{uid}/"
    elif plat == "tiktok":
        url = f"https://www.tiktok.com/@clipmaker/video/{uid}?lang=en"
    elif plat == "whatsapp":
        url = f"https://chat.whatsapp.com/{uid}"
    else:
        raise ValueError(plat)
    return url, extras


DECOYS = [
    "https://www.who.int/emergencies/diseases/novel-coronavirus-2019",
    "https://www.bbc.com/news/world-europe-54002012",
    "https://www.reuters.com/article/uk-factcheck-belarus-video",
    "https://twitter.com/newsdesk",
    "https://twitter.com/search?q=covid",
    "https://twitter.com/i/status/",
    "https://t.co/AbC123xYz",
    "https://bit.ly/3abcDEF",
    "https://www.youtube.com/channel/UC1234567890abcdef",
    "https://www.youtube.com/results?search_query=vaccine",
    "https://www.facebook.com/WHO",
    "https://www.facebook.com/groups/healthtalk/about",
    "https://www.instagram.com/someaccount/",
    "https://www.reddit.com/user/someone",
    "https://www.reddit.com/",
    "https://en.wikipedia.org/",
    "https://www.tiktok.com/@clipmaker",
    "https://www.pinterest.com/someone/boards/",
    "https://gab.com/someone",
    "https://www.whatsapp.com/coronavirus",
    "mailto:tips@example.org",
    "/about-us",
    "#comments",
    "https://archive.org/details/factcheck-2020",
    "https://www.cdc.gov/coronavirus/2019-ncov/index.html",
]
for k in range(60):
    articles[(k * 7) % 40]["decoys"].append(DECOYS[k % len(DECOYS)])

CHROME = """
<header><nav><a href="https://twitter.com/poynter/status/1111111111111111111">Latest</a>
<a href="https://www.facebook.com/poynter/posts/999999999999">Follow</a></nav></header>
"""
FOOTER = """
<footer><a href="https://www.youtube.com/watch?v=FooterVideo">Subscribe</a>
<a href="https://www.instagram.com/p/FooterPost/">Instagram</a></footer>
"""

# ---------------------------------------------------------------- HTML

snippets = {lang: eval_snippets(lang) for lang in set(PY_LANGS)}
snippet_cursor = {lang: 0 for lang in snippets}


def body_paragraphs(lang):
    pool = snippets[lang]
    out = []
    for _ in range(2):
        out.append(pool[snippet_cursor[lang] % len(pool)])
        snippet_cursor[lang] += 1
    return out


def anchors_html(a):
    refs = []
    for p in a["links"]:
        url, extras = post_urls(p)
        p.setdefault("urls", {})[a["news_id"]] = url
        refs.append(url)
        refs.extend(extras)
    refs.extend(a["decoys"])
    rng.shuffle(refs)
    parts = []
    for n, url in enumerate(refs, 1):
        href = url.replace("&", "&amp;")
        if "twitter.com" in url.lower() and "/status/" in url and rng.random() < 0.3:
            parts.append(f'<blockquote class="twitter-tweet"><a href="{href}">[{n}]</a></blockquote>')
        else:
            parts.append(f'<a href="{href}">[{n}]</a>')
    return parts


def fmt_date(d, source):
    if d is None:
        return None
    if source == "PY":
        return f"{d.day:02d} {MONTHS[d.month - 1]} {d.year}"
    return f"{MONTHS[d.month - 1]} {d.day}, {d.year}"


def render_py(a):
    paras = "\n".join(f"<p>{t}</p>" for t in body_paragraphs(a["lang"]))
    refs = " ".join(anchors_html(a))
    return f"""<!DOCTYPE html>
<html lang="{a['lang']}"><head><meta charset="utf-8"><title>{a['title']} | Poynter</title></head>
<body>{CHROME}
<main>
<h1 class="entry-title">{a['title']}</h1>
<p class="entry-meta"><span class="entry-date">{fmt_date(a['date'], 'PY')}</span>
Fact-checked by: <span class="fact-checker">{a['publisher']}</span>
<span class="country">{', '.join(a['countries'])}</span></p>
<div class="verdict">Rating: <strong>{a['verdict']}</strong></div>
<div class="article-body">
{paras}
<p class="refs">{refs}</p>
</div>
</main>{FOOTER}</body></html>
"""


def render_sp(a):
    paras = "\n".join(f"<p>{t}</p>" for t in body_paragraphs(a["lang"]))
    refs = " ".join(anchors_html(a))
    date_el = "" if a["date"] is None else f'<time class="published">{fmt_date(a["date"], "SP")}</time>'
    rating = "" if a["verdict"] is None else f'<div class="rating-label"><span>{a["verdict"]}</span></div>'
    return f"""<!DOCTYPE html>
<html lang="en"><head><meta charset="utf-8"><meta name="publisher" content="Snopes">
<title>{a['title']}</title></head>
<body>{CHROME}
<h1 class="title">{a['title']}</h1>
{date_el}
{rating}
<article class="post-body">
{paras}
<p>{refs}</p>
<script>var related = '<a href="https://twitter.com/x/status/2222222222222222222">';</script>
</article>{FOOTER}</body></html>
"""


PY_PROFILE = {
    "title": {"selector": "h1.entry-title", "text": True},
    "published_date": {"selector": "span.entry-date", "text": True},
    "body": {"selector": "div.article-body", "text": True},
    "verdict": {"selector": "div.verdict strong", "text": True},
    "countries": {"selector": "span.country", "text": True},
    "publisher": {"selector": "span.fact-checker", "text": True},
}
SP_PROFILE = {
    "title": {"selector": "h1.title", "text": True},
    "published_date": {"selector": "time.published", "text": True},
    "body": {"selector": "article.post-body", "text": True},
    "verdict": {"selector": "div.rating-label span", "text": True},
    "countries": {"selector": "ul.tags li.country", "text": True},
    "publisher": {"selector": "meta[name='publisher']", "attribute": "content"},
}


def source_url(a):
    if a["source"] == "PY":
        return f"https://www.poynter.org/?ifcn_misinformation={a['slug']}"
    return f"https://www.snopes.com/fact-check/{a['slug']}/"


def dump_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")


def main():
    if OUT.exists():
        shutil.rmtree(OUT)
    sources = OUT / "sources"
    manifests = {"PY": ("Poynter", "poynter"), "SP": ("Snopes", "snopes")}
    entries = {"PY": [], "SP": []}
    for a in articles:
        rel = f"html/{a['source'].lower()}/{a['slug']}.html"
        html = render_py(a) if a["source"] == "PY" else render_sp(a)
        (sources / rel).parent.mkdir(parents=True, exist_ok=True)
        (sources / rel).write_text(html, encoding="utf-8")
        a["source_url"] = source_url(a)
        e = {"source_url": a["source_url"], "html_path": rel}
        if a["hint"]:
            e["verdict_hint"] = a["hint"]
        entries[a["source"]].append(e)
    for acr, (name, profile) in manifests.items():
        dump_json(sources / f"{profile}.manifest.json", {
            "source_name": name,
            "source_acronym": acr,
            "parser_profile": profile,
            "entries": entries[acr],
        })
    dump_json(sources / "poynter.json", PY_PROFILE)
    dump_json(sources / "snopes.json", SP_PROFILE)

    fixtures = OUT / "posts"
    for plat in PLATFORM_SIZES:
        (fixtures / plat).mkdir(parents=True, exist_ok=True)
    deleted_seen = 0
    for p in posts:
        d = fixtures / p["platform"]
        stem = p["uid"].replace("%", "%25").replace("/", "%2F")
        if p["status"] == "deleted":
            # Half carry an explicit marker; the rest are simply absent.
            if deleted_seen % 2 == 0:
                (d / f"{stem}.deleted").write_text("", encoding="utf-8")
            deleted_seen += 1
            continue
        m = p["modality"]
        text = "" if m == "image" else f"Post {p['uid']} says the cure was hidden from the public."
        media = []
        if m in ("image", "text+image"):
            media = [f"https://media.example/{p['platform']}/{p['uid']}.jpg"]
            if p["platform"] == "twitter" and rng.random() < 0.3:
                media = [f"https://pbs.twimg.com/media/{p['uid'][:8]}?format=jpg&name=large"]
        elif m == "video":
            ext = {"instagram": "mov", "tiktok": "mp4"}.get(p["platform"], rng.choice(["mp4", "mp4", "m3u8"]))
            media = [f"https://media.example/{p['platform']}/{p['uid']}.{ext}"]
            if rng.random() < 0.3:
                media.insert(0, f"https://media.example/{p['platform']}/{p['uid']}-thumb.png")
        metrics = {}
        if p["platform"] == "twitter":
            metrics = {"likes": rng.randrange(5000), "retweets": rng.randrange(2000)}
        elif p["platform"] == "youtube":
            metrics = {"views": rng.randrange(10**6), "likes": rng.randrange(10**4), "dislikes": rng.randrange(10**3)}
        body = {
            "platform": p["platform"],
            "post_uid": p["uid"],
            "text_content": text,
            "media_refs": media,
            "author": f"@{p['platform']}_author_{rng.randrange(100)}",
            "posted_at": p["posted_at"],
            "metrics": metrics,
        }
        dump_json(d / f"{stem}.json", body)

    dump_json(OUT / "run.json", {
        "manifests": ["sources/poynter.manifest.json", "sources/snopes.manifest.json"],
        "fixtures": "posts",
        "store": "store",
        "concurrency": 4,
    })

    # ------------------------------------------------------------ expected
    golden_links = sorted(
        ({"news_id": nid, "platform": p["platform"], "post_uid": p["uid"]}
         for p in posts for nid in p["citations"]),
        key=lambda r: (r["news_id"], r["platform"], r["post_uid"]),
    )
    dump_json(OUT / "golden_links.json", golden_links)

    dump_json(OUT / "expected/articles.json", [
        {
            "news_id": a["news_id"],
            "source_url": a["source_url"],
            "title": a["title"],
            "published_date": a["date"].isoformat() if a["date"] else None,
            "verdict_raw": a["label_raw"],
            "label_norm": a["label_norm"],
            "publisher": a["publisher"],
            "countries": a["countries"],
            "language": a["lang"],
        }
        for a in articles
    ])

    def rank(nid):
        d = by_id[nid]["date"]
        return (d is None, d or date.min, nid)

    winners = []
    for p in posts:
        if p["status"] != "fetched":
            continue
        best = min(p["citations"], key=rank)
        winners.append({
            "platform": p["platform"],
            "post_uid": p["uid"],
            "news_id": best,
            "label_norm": by_id[best]["label_norm"],
            "modality": p["modality"],
        })
    winners.sort(key=lambda w: (PLATFORM_ORDER.index(w["platform"]), w["post_uid"]))
    dump_json(OUT / "expected/winners.json", winners)

    conflicts = sum(
        1 for p in posts if p["status"] == "fetched" and len(p["citations"]) == 2
        and len({by_id[n]["label_norm"] for n in p["citations"]}) == 2
    )
    dump_json(OUT / "expected/summary.json", {
        "articles": len(articles),
        "links": len(golden_links),
        "unique_posts": len(posts),
        "fetched": sum(p["status"] == "fetched" for p in posts),
        "deleted": sum(p["status"] == "deleted" for p in posts),
        "unavailable": 0,
        "labeled": sum(len(p["citations"]) for p in posts if p["status"] == "fetched"),
        "duplicates_dropped": sum(len(p["citations"]) - 1 for p in posts if p["status"] == "fetched"),
        "label_conflicts": conflicts,
        "articles_with_links": sum(1 for a in articles if a["links"]),
        "decoys": sum(len(a["decoys"]) for a in articles),
        "export_lines": len(winners),
    })

    summary_rows = []
    class_rows = []
    for plat in PLATFORM_ORDER:
        ps = [p for p in posts if p["platform"] == plat]
        if not ps:
            continue
        ws = [w for w in winners if w["platform"] == plat]
        mods = [w["modality"] for w in ws]
        classes = [w["label_norm"] for w in ws]
        summary_rows.append([
            plat, sum(len(p["citations"]) for p in ps), len(ps),
            mods.count("text"), mods.count("image"), mods.count("text+image"), mods.count("video"),
        ])
        class_rows.append([
            plat, classes.count("false"), classes.count("partially_false"),
            classes.count("other"), classes.count("true"),
        ])
    write_csv(OUT / "expected/platform_summary.csv",
              ["platform", "total_links", "unique_posts", "text", "image", "text+image", "video"], summary_rows)
    write_csv(OUT / "expected/class_distribution.csv",
              ["platform", "false", "partially_false", "other", "true"], class_rows)

    for min_posts in (0, 25):
        rows = []
        for plat in PLATFORM_ORDER:
            buckets = {}
            for p in posts:
                if p["platform"] != plat:
                    continue
                if p["posted_at"]:
                    month, own = p["posted_at"][:7], True
                else:
                    dates = [by_id[n]["date"] for n in p["citations"] if by_id[n]["date"]]
                    if not dates:
                        continue
                    month, own = min(dates).strftime("%Y-%m"), False
                cell = buckets.setdefault(month, [0, 0])
                cell[0 if own else 1] += 1
            total = sum(a + b for a, b in buckets.values())
            if total <= min_posts:
                continue
            for month in sorted(buckets):
                own, fb = buckets[month]
                rows.append([plat, month, own + fb, own, fb])
        write_csv(OUT / f"expected/timeline_min{min_posts}.csv",
                  ["platform", "month", "count", "from_posted_at", "from_article_date"], rows)


if __name__ == "__main__":
    main()
