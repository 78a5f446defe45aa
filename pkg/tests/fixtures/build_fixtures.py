"""Regenerates the offline fixtures in this directory.

    python3 tests/fixtures/build_fixtures.py

Pages are small hand-written MediaWiki ``parse`` payloads; playback scripts
replay the main-LM turns of three recorded agent runs plus the notes-LM
answers they imply.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

HERE = Path(__file__).parent
API = "https://en.wikipedia.org/w/api.php"
MAIN = "Solve a question answering task"
NOTES = "Extract relevant information which is not previously extracted"


def search_row(query: str, titles: list[str], k: int = 5) -> dict:
    params = {"action": "query", "list": "search", "srsearch": query, "srlimit": k,
              "srprop": "", "format": "json", "formatversion": 2}
    body = {"batchcomplete": True, "query": {"search": [{"ns": 0, "title": t} for t in titles]}}
    return {"url": API, "params": {k_: str(v) for k_, v in params.items()},
            "response_body": json.dumps(body), "status": 200}


def page_row(title: str, paragraphs: list[str], resolved: str | None = None, extra_html: str = "") -> dict:
    params = {"action": "parse", "page": title, "prop": "text", "redirects": 1,
              "disableeditsection": 1, "format": "json", "formatversion": 2}
    html = '<div class="mw-parser-output">' + "".join(f"<p>{p}</p>" for p in paragraphs) + extra_html
    html += '<div class="navbox">Navigation links</div><ol class="references"><li>ref</li></ol></div>'
    body = {"parse": {"title": resolved or title, "pageid": zlib.crc32(title.encode()) % 10**6, "text": html}}
    return {"url": API, "params": {k_: str(v) for k_, v in params.items()},
            "response_body": json.dumps(body), "status": 200}


def main_turn(question: str, thought: str, action: str, usage: tuple[int, int]) -> dict:
    return {"match": "prefix", "prompt_substring": [MAIN, f"Question: {question}"],
            "response": f"Thought: {thought}\nAction: {action}",
            "usage": {"input": usage[0], "output": usage[1]}}


def notes_turn(query: str, page_marker: str, response: str, usage: tuple[int, int]) -> dict:
    return {"match": "prefix", "prompt_substring": [NOTES, f"Query: {query}", page_marker],
            "response": response, "usage": {"input": usage[0], "output": usage[1]}}


PAGES = {
    "2022 FIFA World Cup": ["The 2022 FIFA World Cup was held in Qatar.",
                             "Japan beat Spain 2-1 in the group stage; Ao Tanaka scored the winner after a video review."],
    "FIFA World Cup": ["The FIFA World Cup is an international association football competition."],
    "2018 FIFA World Cup": ["The 2018 FIFA World Cup was held in Russia.",
                            "Diego Costa scored against Portugal in a match where video review decided a goal for the first time at a World Cup."],
    "2019 FIFA Women's World Cup": ["The 2019 FIFA Women's World Cup was held in France."],
    "Video assistant referee": ["The video assistant referee reviews decisions made by the head referee.",
                                "The first VAR decision at a World Cup came on 16 June 2018 in France against Australia."],
    "Diego Costa": ["Diego da Silva Costa is a footballer who plays as a striker.",
                    "At the 2018 World Cup he was an Atlético Madrid player."],
    "Mayor of Austin": ["The mayor of Austin is the head of the city government of Austin, Texas.",
                        "Kirk Watson served from 1997 to 2001 and took office again on January 6, 2023."],
    "2024 Austin mayoral election": ["The 2024 Austin mayoral election was won by the incumbent Kirk Watson."],
    "Austin, Texas": ["Austin is the capital city of the U.S. state of Texas.",
                      "Mayor Kirk Watson was born in 1958 in Oak Park, Illinois, according to this page."],
    "Kirk Watson": ["Kirk Preston Watson is an American politician and lawyer.",
                    "Born in Oklahoma City, Oklahoma, U.S., he grew up in Texas."],
    "Oklahoma City": ["Oklahoma City is the capital of Oklahoma.",
                      "The population was 506,132 at the 2000 census."],
    "Xavier Samuel": ["Xavier Samuel (born 10 December 1983) is an Australian film and theatre actor."],
    "Benedict Samuel": ["Benedict Samuel is an Australian actor, writer and director."],
    "Mr. Church": ["Mr. Church is a 2016 American drama film starring Eddie Murphy, Britt Robertson, Xavier Samuel and Lucy Fry."],
    "Spin Out (film)": ["Spin Out is a 2016 Australian romantic comedy film starring Xavier Samuel and Morgan Griffin.",
                        "The cast also includes Lincoln Lewis."],
    "Vampire Academy (film)": ["Vampire Academy is a 2014 American fantasy comedy horror film directed by Mark Waters.",
                               "The film stars Zoey Deutch as Rose Hathaway and Lucy Fry as Lissa Dragomir.",
                               "It follows their return to St Vladimir's Academy."],
    "Bloodlines (book series)": ["Bloodlines is a book series by Richelle Mead."],
    "Spinning Out": ["Spinning Out is an American drama television series."],
}

SEARCHES = {
    "FIFA World Cup Goal": ["2022 FIFA World Cup", "FIFA World Cup"],
    "FIFA World Cup VAR Decision": ["2018 FIFA World Cup", "2022 FIFA World Cup", "2019 FIFA Women's World Cup",
                                    "Video assistant referee", "FIFA World Cup"],
    "Diego Costa": ["Diego Costa"],
    "Austin, Texas mayors": ["Mayor of Austin", "2024 Austin mayoral election", "Austin, Texas"],
    "Kirk Watson": ["Kirk Watson", "Austin, Texas"],
    "Kirk Watson (American politician)": ["Kirk Watson (American politician)"],
    "Oklahoma City, Oklahoma": ["Oklahoma City"],
    "Xavier Samuel filmography": ["Xavier Samuel", "Benedict Samuel"],
    "Xavier Samuel 2016 film": ["Xavier Samuel", "Mr. Church", "Spin Out (film)"],
    "Vasilisa Dragomir Vampire Academy actress": ["Vampire Academy (film)", "Bloodlines (book series)"],
    "Spin Out film cast": ["Spin Out (film)", "Spinning Out"],
}

DIEGO_Q = "Diago Costa played for which club when he was awarded the first FIFA World Cup Goal based on a VAR Decision?"
Q_GOAL = "What was the first FIFA World Cup Goal awarded based on a VAR Decision, and who scored it?"
Q_CLUB = "Which club did Diego Costa play for in the 2018 FIFA World Cup?"


def diego_script() -> list[dict]:
    return [
        main_turn(DIEGO_Q, "First find the first World Cup goal given after a VAR decision.",
                  f"search[FIFA World Cup Goal; {Q_GOAL}]", (410, 62)),
        notes_turn(Q_GOAL, "Ao Tanaka scored", "YES#Ao Tanaka", (150, 5)),
        notes_turn(Q_GOAL, "international association football competition", "NO#No relevant context.", (120, 6)),
        main_turn(DIEGO_Q, "That note does not settle it; search for the VAR decision directly.",
                  f"search[FIFA World Cup VAR Decision; {Q_GOAL}]", (520, 58)),
        notes_turn(Q_GOAL, "Diego Costa scored against Portugal",
                   "YES#Diego Costa's first goal against Portugal became the first World Cup goal based on a VAR decision.", (160, 22)),
        notes_turn(Q_GOAL, "Ao Tanaka scored",
                   "YES#A VAR-reviewed goal by Ao Tanaka of Japan against Spain.", (170, 14)),
        notes_turn(Q_GOAL, "held in France", "NO#No relevant context.", (110, 6)),
        notes_turn(Q_GOAL, "reviews decisions made by the head referee",
                   "YES#The first VAR decision at the World Cup came on 16 June 2018 in France against Australia.", (140, 21)),
        notes_turn(Q_GOAL, "international association football competition", "NO#No relevant context.", (120, 6)),
        main_turn(DIEGO_Q, "The results conflict, but the 2018 page names Diego Costa; find his club then.",
                  f"search[Diego Costa; {Q_CLUB}]", (760, 64)),
        notes_turn(Q_CLUB, "plays as a striker", "YES#Atlético Madrid", (130, 4)),
        main_turn(DIEGO_Q, "Diego Costa was an Atlético Madrid player at that World Cup.",
                  "finish[Atlético Madrid]", (840, 31)),
    ]


KIRK_Q = ("According to the 2000 United States census, what was the 2000 population of the birth city of the only "
          "21st-century mayor of Austin, Texas who also served as mayor in the 1990s? Round your answer to the nearest thousand.")
Q_MAYOR = "Who was the 21st-century mayor of Austin, Texas who also served as mayor in the 1990s?"
Q_BORN = "Where was Kirk Watson born?"
Q_CONFIRM = "What is the confirmed birth city of Kirk Watson?"
Q_POP = "What was the population of Oklahoma City in the 2000 United States census?"


def kirk_script() -> list[dict]:
    return [
        main_turn(KIRK_Q, "Identify the mayor first.", f"search[Austin, Texas mayors; {Q_MAYOR}]", (400, 50)),
        notes_turn(Q_MAYOR, "head of the city government",
                   "YES#Kirk Watson took office as mayor on January 6, 2023, having served as mayor from 1997 to 2001.", (200, 25)),
        notes_turn(Q_MAYOR, "won by the incumbent", "YES#Kirk Watson", (90, 4)),
        notes_turn(Q_MAYOR, "capital city of the U.S. state", "YES#Kirk Watson", (180, 4)),
        main_turn(KIRK_Q, "The mayor is Kirk Watson; find his birth city.", f"search[Kirk Watson; {Q_BORN}]", (560, 40)),
        notes_turn(Q_BORN, "American politician and lawyer", "YES#Oklahoma City, Oklahoma, U.S.", (150, 8)),
        notes_turn(Q_BORN, "capital city of the U.S. state", "YES#Kirk Watson was born in 1958 in Oak Park, Illinois", (185, 14)),
        main_turn(KIRK_Q, "Two pages disagree on the birth city; check again.",
                  f"search[Kirk Watson (American politician); {Q_CONFIRM}]", (700, 45)),
        notes_turn(Q_CONFIRM, "American politician and lawyer", "YES#Oklahoma City", (170, 4)),
        main_turn(KIRK_Q, "He was born in Oklahoma City; now its 2000 population.",
                  f"search[Oklahoma City, Oklahoma; {Q_POP}]", (790, 52)),
        notes_turn(Q_POP, "capital of Oklahoma", "YES#506,132", (120, 5)),
        main_turn(KIRK_Q, "506,132 rounds to 506,000.", "finish[506,000]", (880, 30)),
    ]


VAMP_Q = 'What 2016 film stars actor Xavier Samuel and an actress who portrayed Vasilisa Dragomir in the film "Vampire Academy"?'


def vampire_script() -> list[dict]:
    return [
        main_turn(VAMP_Q, "Look up Xavier Samuel's films first.", "search[Xavier Samuel filmography]", (300, 40)),
        main_turn(VAMP_Q, "Narrow it to 2016.", "search[Xavier Samuel 2016 film]", (420, 35)),
        main_turn(VAMP_Q, "Spin Out is one 2016 film; now the actress.",
                  "search[Vasilisa Dragomir Vampire Academy actress]", (560, 38)),
        main_turn(VAMP_Q, "Open the film page for the cast.", "select[Vampire Academy (film)]", (700, 30)),
        main_turn(VAMP_Q, "Lucy Fry played the role; check the Spin Out cast.", "search[Spin Out film cast]", (820, 36)),
        main_turn(VAMP_Q, "Open the Spin Out page.", "select[Spin Out (film)]", (930, 28)),
        main_turn(VAMP_Q, "Lucy Fry is not in Spin Out.",
                  "finish[There is no common film between Xavier Samuel and Lucy Fry in 2016.]", (1010, 33)),
    ]


def write_jsonl(path: Path, rows: list[dict]) -> None:
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


def build() -> None:
    rows = [search_row(q, titles) for q, titles in SEARCHES.items()]
    rows += [page_row(t, ps) for t, ps in PAGES.items()]
    rows.append(page_row("Kirk Watson (American politician)", PAGES["Kirk Watson"], resolved="Kirk Watson"))
    write_jsonl(HERE / "wiki_http.jsonl", rows)
    write_jsonl(HERE / "diego_costa.playback.jsonl", diego_script())
    write_jsonl(HERE / "kirk_watson.playback.jsonl", kirk_script())
    write_jsonl(HERE / "vampire_academy.playback.jsonl", vampire_script())
    write_jsonl(HERE / "frames_diego.jsonl", [{"id": "frames-diego", "Prompt": DIEGO_Q, "Answer": "Atlético Madrid"}])
    write_jsonl(HERE / "frames_kirk.jsonl", [{"id": "frames-kirk", "Prompt": KIRK_Q, "Answer": "506,000"}])
    write_jsonl(HERE / "hotpot_vampire.jsonl", [{"_id": "hotpot-vampire", "question": VAMP_Q, "answer": "Mr. Church"}])


if __name__ == "__main__":
    build()
