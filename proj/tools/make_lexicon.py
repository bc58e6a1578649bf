#!/usr/bin/env python3
"""Extract the shipped lexicon subset from a full CMU pronouncing dictionary.

Usage: make_lexicon.py CMUDICT OUT GRAMMAR_JSON...

Keeps every word used by the given grammars plus a background list of common
English words (the candidates that corrupted phoneme spans are re-segmented
into). Stress digits are stripped and phonemes lowercased.
"""
import json
import re
import sys

BACKGROUND = """
a about after again air all also am an and any are arm art as ask at ate away
back bad bag ball band bar bat be bean bed bee been beer before bell best bet
big bill bird bit bite black blew blow boat bold bone boot bored born both bow
bowl box boy bread break bright bring brook brown bud bus but buy by bye cake
call came can cap car card care cart case cat catch chair cheap check cheese
child chin chip cold come cook cool cop core corn cost could count cry cup cut
dad day dead deal dear deck deep den did die dig dim dirt do dog done door dot
down dress drink drive drop dry due dumb dust each ear east eat egg eight end
even eye face fact fair fall far farm fast fat fear feed feel feet fell few fin
fine fire fish fit five flag flat flew floor flow fly fog food fool foot for
form fort fought found four fox free fresh from fruit full fun game gate gave
get gift girl glad go goal gold gone good got grade grand grass gray great green
grew grow guess gun had hair half hall hand hard has hat have he head hear heard
heat held hell help her here hi high hill him his hit hold hole home hope horse
hot hour house how hug hung hunt hurt i ice if in inch into is it its jar jet
job join joke joy just keep key kid kind king kit knee knew know lake land lane
large last late law lay lead leaf lean led left leg less let lie life light like
line lion list lit live load lock log lone long look lose lost lot loud love low
luck made mail main make man map mark mat may me meal mean meat meet men met
mile milk mind mine miss mix mode mom moon more most move much mud must my nail
name near neck need net new news nice night nine no nose not note now nut oak
odd of off oil old on once one only or our out over own page paid pain pair pan
park part pass past path pay peace pen pet pick pie pig pin pit place plan plane
plate play please plot pole pool poor port post pot pray press pull push put
race rain ran rat raw read red rest rice rich ride right ring rise road rock
role roll roof room root rose round row rule run rush sad safe said sale salt
same sand sat save saw say sea seat see seed seen sell send set shape she shed
ship shop shot show shut sick side sign sing sit size skin sky slow small snow
so soap sock soft sold some son song soon sore sort sound soup south spot star
stay step stick still stone stop store street such suit sun sure sweet tail
take talk tall tap tea team tell ten test than that the them then there these
they thin thing this those though three threw through tie time tip to toe told
tone too took top town toy tree trip true try tub turn two under up us use van
very vote wait wake walk wall want war warm was wash way we wear week well went
were west wet what when where which while white who why wide wife will win wind
wine wish with won wood word wore work would write wrote yard year yes yet you
young your zoo whether weather rate bowling nice hurry
"""

TOKEN_RE = re.compile(r"[a-z']+")


def load_cmu(path):
    entries = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            head, *phones = line.split()
            word = re.sub(r"\(\d+\)$", "", head)
            phones = [re.sub(r"\d", "", p).lower() for p in phones]
            entries.setdefault(word, []).append(phones)
    return entries


def grammar_words(path):
    with open(path, encoding="utf-8") as f:
        g = json.load(f)
    words = set()
    texts = [t for ts in g["intents"].values() for t in ts]
    texts += [v for vs in g["slots"].values() for v in vs]
    texts += g["prefixes"] + g["suffixes"]
    for t in texts:
        for tok in TOKEN_RE.findall(re.sub(r"\{[a-z_]+\}", " ", t.lower())):
            words.add(tok)
    return words


def main():
    cmu_path, out_path, *grammar_paths = sys.argv[1:]
    cmu = load_cmu(cmu_path)
    wanted = set(BACKGROUND.split())
    for path in grammar_paths:
        wanted |= grammar_words(path)
    missing = sorted(w for w in wanted if w not in cmu)
    if missing:
        sys.exit("words missing from dictionary: " + " ".join(missing))
    with open(out_path, "w", encoding="utf-8") as out:
        out.write("# Subset of the CMU Pronouncing Dictionary (cmudict 0.7b).\n")
        out.write("# Copyright (C) 1993-2015 Carnegie Mellon University. BSD-style license;\n")
        out.write("# see http://www.speech.cs.cmu.edu/cgi-bin/cmudict. Stress marks removed.\n")
        for word in sorted(wanted):
            for i, phones in enumerate(cmu[word]):
                head = word if i == 0 else f"{word}({i + 1})"
                out.write(f"{head} {' '.join(phones)}\n")


if __name__ == "__main__":
    main()
