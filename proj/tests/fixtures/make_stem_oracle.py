"""Freeze NLTK PorterStemmer (default mode) outputs for a word list.

Words are drawn from the text files given on the command line; the output
is a tab-separated word<TAB>stem file used by test_text.
"""
import re
import sys

from nltk.stem.porter import PorterStemmer

words = set()
for path in sys.argv[1:]:
    with open(path, encoding="utf-8") as f:
        words.update(re.findall(r"[a-z]+", f.read().lower()))
extra = ["testing", "debugging", "skies", "dying", "ties", "cries", "died", "tied", "spied",
         "generously", "analogically", "hopefully", "archeology", "enjoy", "happy", "sky",
         "conditionally", "feed", "agreed", "plastered", "bled", "motoring", "sing", "hopping",
         "falling", "hissing", "fizzed", "failing", "filing", "controlling", "rolling", "yyyy", "ay", "by"]
words.update(extra)
stemmer = PorterStemmer()
for w in sorted(words):
    print(f"{w}\t{stemmer.stem(w)}")
